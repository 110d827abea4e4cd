#include <map>

#include "json.hpp"

#include "io_util.hpp"
#include "mvface/data.hpp"

namespace mvface::data {

namespace {

constexpr std::string_view kFeatureMagic = "MVFEAT";
constexpr std::string_view kModelMagic = "MVMODEL";

std::vector<std::string> split_words(const std::string& line) { return io::tokens(line); }

std::string expect_key(io::Cursor& cur, std::string_view key) {
  const std::string line = cur.line();
  if (line.rfind(std::string(key), 0) != 0 ||
      (line.size() > key.size() && line[key.size()] != ' ')) {
    throw IoError("'" + cur.source() + "': expected '" + std::string(key) + "' header line, got '" +
                  line + "'");
  }
  return line.size() > key.size() ? line.substr(key.size() + 1) : std::string();
}

std::size_t parse_count(const std::string& s, const std::string& what, const std::string& src) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size() || v < 0) throw std::invalid_argument("");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw IoError("'" + src + "': bad " + what + " '" + s + "'");
  }
}

void append_matrix(std::string& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) io::append_f64_le(out, m(i, j));
  }
}

Eigen::MatrixXd read_matrix(std::string_view bytes, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  std::size_t off = 0;
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      m(i, j) = io::read_f64_le(bytes.data() + off);
      off += 8;
    }
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Feature files
// ---------------------------------------------------------------------------

void save_features(const fs::path& path, const FeatureFile& file) {
  const auto& x = file.features;
  x.validate();
  std::string out;
  out += std::string(kFeatureMagic) + ' ' + std::to_string(kFeatureFormatVersion) + '\n';
  out += "views " + std::to_string(x.num_views()) + '\n';
  out += "dims";
  for (const auto& v : x.views) out += ' ' + std::to_string(v.rows());
  out += '\n';
  out += "samples " + std::to_string(x.num_samples()) + '\n';
  if (file.layout.find('\n') != std::string::npos) throw IoError("layout descriptor has a newline");
  out += "layout " + file.layout + '\n';
  out += "names";
  for (std::size_t p = 0; p < x.num_views(); ++p) {
    std::string name = p < x.view_names.size() ? x.view_names[p] : "view" + std::to_string(p + 1);
    if (name.find_first_of(" \t\n") != std::string::npos || name.empty()) {
      throw IoError("view name '" + name + "' must be a single nonempty word");
    }
    out += ' ' + name;
  }
  out += '\n';
  out += "ids " + std::to_string(x.sample_ids.size()) + '\n';
  for (const auto& id : x.sample_ids) {
    if (id.find('\n') != std::string::npos) throw IoError("sample id contains a newline");
    out += id + '\n';
  }
  std::size_t payload = 0;
  for (const auto& v : x.views) payload += static_cast<std::size_t>(v.size()) * 8;
  out += "payload " + std::to_string(payload) + '\n';
  out.reserve(out.size() + payload);
  for (const auto& v : x.views) append_matrix(out, v);
  io::write_file_atomic(path, out);
}

FeatureFile load_features(const fs::path& path) {
  const std::string bytes = io::read_file(path);
  io::Cursor cur(bytes, path.string());
  const auto src = path.string();

  const auto magic = split_words(cur.line());
  if (magic.size() != 2 || magic[0] != kFeatureMagic) {
    throw IoError("'" + src + "' is not a feature file");
  }
  const auto version = parse_count(magic[1], "version", src);
  if (version != static_cast<std::size_t>(kFeatureFormatVersion)) {
    throw IoError("'" + src + "': unsupported feature file version " + magic[1] +
                  " (this build reads version " + std::to_string(kFeatureFormatVersion) + ")");
  }
  const auto num_views = parse_count(expect_key(cur, "views"), "view count", src);
  const auto dim_words = split_words(expect_key(cur, "dims"));
  if (dim_words.size() != num_views) {
    throw IoError("'" + src + "': integrity error, " + std::to_string(dim_words.size()) +
                  " dims for " + std::to_string(num_views) + " views");
  }
  std::vector<std::size_t> dims;
  for (const auto& w : dim_words) dims.push_back(parse_count(w, "dimension", src));
  const auto samples = parse_count(expect_key(cur, "samples"), "sample count", src);

  FeatureFile file;
  file.layout = expect_key(cur, "layout");
  file.features.view_names = split_words(expect_key(cur, "names"));
  if (file.features.view_names.size() != num_views) {
    throw IoError("'" + src + "': integrity error, view name count differs from view count");
  }
  const auto num_ids = parse_count(expect_key(cur, "ids"), "id count", src);
  if (num_ids != 0 && num_ids != samples) {
    throw IoError("'" + src + "': integrity error, " + std::to_string(num_ids) +
                  " sample ids for " + std::to_string(samples) + " samples");
  }
  for (std::size_t i = 0; i < num_ids; ++i) file.features.sample_ids.push_back(cur.line());

  const auto payload = parse_count(expect_key(cur, "payload"), "payload size", src);
  std::size_t expected = 0;
  for (auto d : dims) expected += d * samples * 8;
  if (payload != expected) {
    throw IoError("'" + src + "': integrity error, header declares " + std::to_string(samples) +
                  " samples (" + std::to_string(expected) + " bytes) but payload is " +
                  std::to_string(payload) + " bytes");
  }
  if (cur.remaining() < payload) cur.fail_truncated();
  if (cur.remaining() > payload) {
    throw IoError("'" + src + "': integrity error, trailing bytes after payload");
  }
  for (auto d : dims) {
    const auto rows = static_cast<Eigen::Index>(d);
    const auto cols = static_cast<Eigen::Index>(samples);
    file.features.views.push_back(
        read_matrix(cur.bytes(d * samples * 8), rows, cols));
  }
  return file;
}

// ---------------------------------------------------------------------------
// Model archives
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

struct BlockWriter {
  json directory = json::array();
  std::string blob;

  void add(const std::string& name, const Eigen::MatrixXd& m) {
    directory.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    append_matrix(blob, m);
  }
};

json gabor_to_json(const gabor::GaborParams& g) {
  json j = {{"k_max", g.k_max},
            {"f", g.f},
            {"sigma", g.sigma},
            {"num_scales", g.num_scales},
            {"num_orientations", g.num_orientations}};
  j["window_radius"] = g.window_radius ? json(*g.window_radius) : json(nullptr);
  return j;
}

gabor::GaborParams gabor_from_json(const json& j) {
  gabor::GaborParams g;
  g.k_max = j.at("k_max").get<double>();
  g.f = j.at("f").get<double>();
  g.sigma = j.at("sigma").get<double>();
  g.num_scales = j.at("num_scales").get<int>();
  g.num_orientations = j.at("num_orientations").get<int>();
  if (!j.at("window_radius").is_null()) g.window_radius = j.at("window_radius").get<int>();
  return g;
}

json solver_to_json(const mvsc::SolverConfig& c) {
  return {{"lambda", c.lambda},
          {"gamma", c.gamma},
          {"num_atoms", c.num_atoms},
          {"outer_tol", c.outer_tol},
          {"outer_max_iters", c.outer_max_iters},
          {"inner_tol", c.inner_tol},
          {"inner_max_iters", c.inner_max_iters},
          {"power_iter_tol", c.power_iter_tol},
          {"power_iter_max", c.power_iter_max},
          {"rng_seed", c.rng_seed}};
}

mvsc::SolverConfig solver_from_json(const json& j) {
  mvsc::SolverConfig c;
  c.lambda = j.at("lambda").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.num_atoms = j.at("num_atoms").get<int>();
  c.outer_tol = j.at("outer_tol").get<double>();
  c.outer_max_iters = j.at("outer_max_iters").get<int>();
  c.inner_tol = j.at("inner_tol").get<double>();
  c.inner_max_iters = j.at("inner_max_iters").get<int>();
  c.power_iter_tol = j.at("power_iter_tol").get<double>();
  c.power_iter_max = j.at("power_iter_max").get<int>();
  c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save_model(const fs::path& path, const ModelArchive& archive) {
  if (archive.dictionary.num_views() != archive.view_dims.size()) {
    throw DimensionError("model archive: dictionary view count differs from the partition");
  }
  for (std::size_t p = 0; p < archive.view_dims.size(); ++p) {
    if (static_cast<std::size_t>(archive.dictionary.dictionaries[p].rows()) !=
        archive.view_dims[p]) {
      throw DimensionError("model archive: view " + std::to_string(p) +
                           " dictionary rows differ from the partition descriptor");
    }
  }

  BlockWriter blocks;
  for (std::size_t p = 0; p < archive.dictionary.num_views(); ++p) {
    blocks.add("dictionary/" + std::to_string(p), archive.dictionary.dictionaries[p]);
  }
  json classifiers = json::object();
  if (archive.ls) {
    blocks.add("ls/weights", archive.ls->weights);
    blocks.add("ls/bias", archive.ls->bias);
    classifiers["ls"] = {{"ridge", archive.ls->ridge}};
  }
  if (archive.svm) {
    blocks.add("svm/weights", archive.svm->weights);
    blocks.add("svm/bias", archive.svm->bias);
    classifiers["svm"] = {{"c", archive.svm->c}, {"epochs", archive.svm->epochs}};
  }

  json meta = {{"format_version", archive.version},
               {"gabor", gabor_to_json(archive.gabor)},
               {"partition",
                {{"method", archive.method},
                 {"layout", archive.layout},
                 {"view_names", archive.view_names},
                 {"view_dims", archive.view_dims}}},
               {"solver", solver_to_json(archive.solver)},
               {"task", archive.task},
               {"class_names", archive.class_names},
               {"classifiers", classifiers},
               {"training", {{"seed", archive.seed}, {"notes", archive.notes}}},
               {"blocks", blocks.directory}};
  const std::string meta_text = meta.dump(2);

  std::string out = std::string(kModelMagic) + ' ' + std::to_string(archive.version) + '\n';
  out += "meta " + std::to_string(meta_text.size()) + '\n';
  out += meta_text + '\n';
  out += "blob " + std::to_string(blocks.blob.size()) + '\n';
  out += blocks.blob;
  io::write_file_atomic(path, out);
}

ModelArchive load_model(const fs::path& path) {
  const std::string bytes = io::read_file(path);
  io::Cursor cur(bytes, path.string());
  const auto src = path.string();

  const auto magic = split_words(cur.line());
  if (magic.size() != 2 || magic[0] != kModelMagic) {
    throw IoError("'" + src + "' is not a model archive");
  }
  const auto version = parse_count(magic[1], "version", src);
  if (version > static_cast<std::size_t>(kModelFormatVersion) || version == 0) {
    throw IoError("'" + src + "': model archive version " + magic[1] +
                  " is not supported by this build (reads version " +
                  std::to_string(kModelFormatVersion) + "); no migration path available");
  }
  const auto meta_size = parse_count(expect_key(cur, "meta"), "metadata size", src);
  const std::string meta_text(cur.bytes(meta_size));
  if (cur.line() != "") throw IoError("'" + src + "': malformed metadata terminator");
  const auto blob_size = parse_count(expect_key(cur, "blob"), "blob size", src);
  if (cur.remaining() < blob_size) cur.fail_truncated();
  if (cur.remaining() > blob_size) throw IoError("'" + src + "': trailing bytes after blob");
  const std::string_view blob = cur.bytes(blob_size);

  ModelArchive a;
  try {
    const json meta = json::parse(meta_text);
    a.version = meta.at("format_version").get<int>();
    a.gabor = gabor_from_json(meta.at("gabor"));
    const auto& part = meta.at("partition");
    a.method = part.at("method").get<std::string>();
    a.layout = part.at("layout").get<std::string>();
    a.view_names = part.at("view_names").get<std::vector<std::string>>();
    a.view_dims = part.at("view_dims").get<std::vector<std::size_t>>();
    a.solver = solver_from_json(meta.at("solver"));
    a.task = meta.at("task").get<std::string>();
    a.class_names = meta.at("class_names").get<std::vector<std::string>>();
    a.seed = meta.at("training").at("seed").get<std::uint64_t>();
    a.notes = meta.at("training").at("notes").get<std::string>();

    std::size_t offset = 0;
    std::map<std::string, Eigen::MatrixXd> mats;
    for (const auto& b : meta.at("blocks")) {
      const auto rows = b.at("rows").get<Eigen::Index>();
      const auto cols = b.at("cols").get<Eigen::Index>();
      const auto len = static_cast<std::size_t>(rows * cols) * 8;
      if (offset + len > blob.size()) {
        throw IoError("'" + src + "': unexpected end of data in block " +
                      b.at("name").get<std::string>());
      }
      mats[b.at("name").get<std::string>()] = read_matrix(blob.substr(offset, len), rows, cols);
      offset += len;
    }
    if (offset != blob.size()) throw IoError("'" + src + "': integrity error, unused blob bytes");

    for (std::size_t p = 0; p < a.view_dims.size(); ++p) {
      const auto it = mats.find("dictionary/" + std::to_string(p));
      if (it == mats.end()) throw IoError("'" + src + "': missing dictionary block " + std::to_string(p));
      if (static_cast<std::size_t>(it->second.rows()) != a.view_dims[p]) {
        throw IoError("'" + src + "': dictionary " + std::to_string(p) +
                      " does not match the partition descriptor");
      }
      a.dictionary.dictionaries.push_back(it->second);
    }
    const auto& cls = meta.at("classifiers");
    if (cls.contains("ls")) {
      classify::LSModel m;
      m.weights = mats.at("ls/weights");
      m.bias = mats.at("ls/bias");
      m.ridge = cls.at("ls").at("ridge").get<double>();
      a.ls = std::move(m);
    }
    if (cls.contains("svm")) {
      classify::SVMModel m;
      m.weights = mats.at("svm/weights");
      m.bias = mats.at("svm/bias");
      m.c = cls.at("svm").at("c").get<double>();
      m.epochs = cls.at("svm").at("epochs").get<int>();
      a.svm = std::move(m);
    }
  } catch (const json::exception& e) {
    throw IoError("'" + src + "': malformed model metadata: " + e.what());
  } catch (const std::out_of_range&) {
    throw IoError("'" + src + "': model archive is missing a classifier block");
  }
  return a;
}

void check_compatible(const ModelArchive& archive, const mvsc::MultiViewFeatureMatrix& x) {
  if (x.num_views() != archive.view_dims.size()) {
    throw DimensionError("features have " + std::to_string(x.num_views()) +
                         " views, the model expects " + std::to_string(archive.view_dims.size()) +
                         " (" + archive.method + ")");
  }
  for (std::size_t p = 0; p < x.num_views(); ++p) {
    if (static_cast<std::size_t>(x.views[p].rows()) != archive.view_dims[p]) {
      const std::string name = p < archive.view_names.size() ? archive.view_names[p] : "";
      throw DimensionError("view " + std::to_string(p) + " (" + name + ") has dimension " +
                           std::to_string(x.views[p].rows()) + ", the model expects " +
                           std::to_string(archive.view_dims[p]));
    }
  }
}

}  // namespace mvface::data
