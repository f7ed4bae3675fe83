#include "mvrad/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mvrad/error.hpp"

namespace mvrad {

namespace {

std::string hex(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

std::string join_sizes(const std::vector<std::size_t>& sizes) {
  std::string out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(sizes[i]);
  }
  return out.empty() ? "-" : out;
}

std::vector<std::size_t> split_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  if (text == "-") return out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(std::stoul(part));
  return out;
}

void write_array(std::ostringstream& out, const std::string& name, const double* data, Eigen::Index rows,
                 Eigen::Index cols) {
  out << "array " << name << ' ' << rows << ' ' << cols << '\n';
  for (Eigen::Index i = 0; i < rows * cols; ++i) {
    out << hex(data[i]) << ((i + 1) % cols == 0 ? '\n' : ' ');
  }
}

Error corrupt(const std::string& what) { return Error(ErrorKind::MalformedCsv, "checkpoint: " + what); }

}  // namespace

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  const VaeConfig& c = checkpoint.model.config;
  std::ostringstream out;
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "config input_dims " << c.input_dims[0] << ',' << c.input_dims[1] << '\n';
  out << "config encoder_hidden " << join_sizes(c.encoder_hidden) << '\n';
  out << "config latent_dim " << c.latent_dim << '\n';
  out << "config decoder_hidden " << join_sizes(c.decoder_hidden) << '\n';
  out << "config dropout_rate " << hex(c.dropout_rate) << '\n';
  out << "config l2_lambda " << hex(c.l2_lambda) << '\n';
  out << "config beta " << hex(c.beta) << '\n';
  out << "config lr " << hex(c.lr) << '\n';
  out << "config batch_size " << c.batch_size << '\n';
  out << "config max_epochs " << c.max_epochs << '\n';
  out << "config patience " << c.patience << '\n';
  out << "config min_delta " << hex(c.min_delta) << '\n';
  out << "config lr_factor " << hex(c.lr_factor) << '\n';
  out << "config lr_patience " << c.lr_patience << '\n';
  out << "config lr_floor " << hex(c.lr_floor) << '\n';
  out << "config logvar_clamp " << hex(c.logvar_clamp) << '\n';
  out << "config seed " << c.seed << '\n';
  auto model = checkpoint.model;
  for (const auto& t : model.tensors()) write_array(out, "param/" + t.name, t.values.data(), t.rows, t.cols);
  for (const auto& [name, m] : checkpoint.extras) write_array(out, "extra/" + name, m.data(), m.rows(), m.cols());
  out << "end\n";
  return out.str();
}

Checkpoint parse_checkpoint(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kCheckpointMagic) throw corrupt("bad magic");
  if (version != kCheckpointVersion) throw corrupt("unsupported version " + std::to_string(version));

  VaeConfig c;
  std::map<std::string, Matrix> arrays;
  std::string word;
  while (in >> word) {
    if (word == "end") break;
    if (word == "config") {
      std::string key, value;
      in >> key >> value;
      auto f = [&] { return std::strtod(value.c_str(), nullptr); };
      auto u = [&] { return static_cast<std::size_t>(std::stoull(value)); };
      if (key == "input_dims") {
        auto dims = split_sizes(value);
        if (dims.size() != 2) throw corrupt("input_dims");
        c.input_dims = {dims[0], dims[1]};
      } else if (key == "encoder_hidden") c.encoder_hidden = split_sizes(value);
      else if (key == "latent_dim") c.latent_dim = u();
      else if (key == "decoder_hidden") c.decoder_hidden = split_sizes(value);
      else if (key == "dropout_rate") c.dropout_rate = f();
      else if (key == "l2_lambda") c.l2_lambda = f();
      else if (key == "beta") c.beta = f();
      else if (key == "lr") c.lr = f();
      else if (key == "batch_size") c.batch_size = u();
      else if (key == "max_epochs") c.max_epochs = u();
      else if (key == "patience") c.patience = u();
      else if (key == "min_delta") c.min_delta = f();
      else if (key == "lr_factor") c.lr_factor = f();
      else if (key == "lr_patience") c.lr_patience = u();
      else if (key == "lr_floor") c.lr_floor = f();
      else if (key == "logvar_clamp") c.logvar_clamp = f();
      else if (key == "seed") c.seed = std::stoull(value);
      else throw corrupt("unknown config key " + key);
    } else if (word == "array") {
      std::string name;
      Eigen::Index rows = 0, cols = 0;
      in >> name >> rows >> cols;
      if (!in || rows < 0 || cols < 0) throw corrupt("bad array header");
      Matrix m(rows, cols);
      std::string token;
      for (Eigen::Index i = 0; i < rows * cols; ++i) {
        if (!(in >> token)) throw corrupt("truncated array " + name);
        m.data()[i] = std::strtod(token.c_str(), nullptr);
      }
      arrays.emplace(std::move(name), std::move(m));
    } else {
      throw corrupt("unexpected token " + word);
    }
  }
  if (word != "end") throw corrupt("missing end marker");

  Checkpoint checkpoint{MvVaeModel::initialize(c), {}};
  for (auto& t : checkpoint.model.tensors()) {
    auto it = arrays.find("param/" + t.name);
    if (it == arrays.end()) throw corrupt("missing tensor " + t.name);
    if (it->second.rows() != t.rows || it->second.cols() != t.cols) throw corrupt("tensor shape " + t.name);
    std::copy_n(it->second.data(), t.values.size(), t.values.begin());
    arrays.erase(it);
  }
  for (auto& [name, m] : arrays) {
    if (name.rfind("extra/", 0) != 0) throw corrupt("unexpected array " + name);
    checkpoint.extras.emplace(name.substr(6), std::move(m));
  }
  return checkpoint;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << serialize_checkpoint(checkpoint);
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileUnreadable, "cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace mvrad
