#include "effseg/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace effseg {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw DataError("not a number: '" + s + "'");
  return v;
}

namespace {

int parse_int(const std::string& s) {
  int v = 0;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw DataError("not an integer: '" + s + "'");
  return v;
}

// ---- PGM helpers ----

std::size_t skip_space_and_comments(const std::string& b, std::size_t i) {
  while (i < b.size()) {
    if (b[i] == '#') {
      while (i < b.size() && b[i] != '\n') ++i;
    } else if (std::isspace(static_cast<unsigned char>(b[i]))) {
      ++i;
    } else {
      break;
    }
  }
  return i;
}

int header_int(const std::string& b, std::size_t& i) {
  i = skip_space_and_comments(b, i);
  const std::size_t start = i;
  while (i < b.size() && std::isdigit(static_cast<unsigned char>(b[i]))) ++i;
  if (start == i) throw DataError("PGM: malformed header");
  return parse_int(b.substr(start, i - start));
}

struct RawPgm {
  int width = 0, height = 0, maxval = 0;
  const unsigned char* pixels = nullptr;
};

RawPgm parse_pgm(const std::string& b) {
  if (b.size() < 2 || b[0] != 'P' || b[1] != '5') throw DataError("PGM: not a binary (P5) file");
  std::size_t i = 2;
  RawPgm p;
  p.width = header_int(b, i);
  p.height = header_int(b, i);
  p.maxval = header_int(b, i);
  if (p.width < 1 || p.height < 1) throw DataError("PGM: empty image");
  if (p.maxval < 1 || p.maxval > 255) throw DataError("PGM: only maxval 1..255 is supported");
  if (i >= b.size() || !std::isspace(static_cast<unsigned char>(b[i]))) throw DataError("PGM: malformed header");
  ++i;
  if (b.size() - i < static_cast<std::size_t>(p.width) * p.height) throw DataError("PGM: truncated pixel data");
  p.pixels = reinterpret_cast<const unsigned char*>(b.data() + i);
  return p;
}

std::string pgm_header(Index h, Index w) { return "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n"; }

// ---- little-endian binary helpers ----

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

struct Reader {
  const std::string& b;
  std::size_t i = 0;

  void need(std::size_t n) const {
    if (b.size() - i < n) throw DataError("weights: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= std::uint32_t(static_cast<unsigned char>(b[i + k])) << (8 * k);
    i += 4;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = b.substr(i, n);
    i += n;
    return s;
  }
};

std::map<std::string, std::size_t> header_index(const std::vector<std::string>& header) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < header.size(); ++i) idx[header[i]] = i;
  return idx;
}

std::size_t column(const std::map<std::string, std::size_t>& idx, const std::string& name, const std::string& what) {
  const auto it = idx.find(name);
  if (it == idx.end()) throw DataError(what + ": missing column '" + name + "'");
  return it->second;
}

std::optional<double> optional_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

}  // namespace

Image decode_pgm(const std::string& bytes) {
  const RawPgm p = parse_pgm(bytes);
  Image img(p.height, p.width);
  const float maxval = static_cast<float>(p.maxval);
  for (Index k = 0; k < img.size(); ++k) img.data()[k] = std::min(1.0f, p.pixels[k] / maxval);
  return img;
}

std::string encode_pgm(const Image& img) {
  std::string out = pgm_header(img.rows(), img.cols());
  out.reserve(out.size() + img.size());
  for (Index k = 0; k < img.size(); ++k) {
    const float v = std::clamp(img.data()[k], 0.0f, 1.0f);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f))));
  }
  return out;
}

Image read_pgm(const fs::path& path) {
  try {
    return decode_pgm(read_text(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_pgm(const fs::path& path, const Image& img) { write_text(path, encode_pgm(img)); }

Mask read_mask_pgm(const fs::path& path) {
  std::string bytes = read_text(path);
  try {
    const RawPgm p = parse_pgm(bytes);
    Mask m(p.height, p.width);
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = p.pixels[k] * 2 > p.maxval ? 1 : 0;
    return m;
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_mask_pgm(const fs::path& path, const Mask& mask) {
  std::string out = pgm_header(mask.rows(), mask.cols());
  for (Index k = 0; k < mask.size(); ++k) out.push_back(static_cast<char>(mask.data()[k] ? 255 : 0));
  write_text(path, out);
}

void write_dataset(const fs::path& dir, const std::vector<Sample>& samples) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  std::string meta = "id,probe,apex_row,apex_col,cross_top_row,cross_top_col,cross_bottom_row,cross_bottom_col\n";
  for (const auto& s : samples) {
    write_pgm(dir / "images" / (s.id + ".pgm"), s.image);
    write_mask_pgm(dir / "masks" / (s.id + ".pgm"), s.mask);
    meta += s.id + "," + to_string(s.probe) + ",";
    meta += s.apex ? format_double(s.apex->row) + "," + format_double(s.apex->col) : std::string(",");
    if (s.crosses.size() == 2)
      meta += "," + std::to_string(s.crosses[0].row) + "," + std::to_string(s.crosses[0].col) + "," +
              std::to_string(s.crosses[1].row) + "," + std::to_string(s.crosses[1].col);
    else
      meta += ",,,,";
    meta += "\n";
  }
  write_text(dir / "meta.csv", meta);
}

DatasetLoad load_dataset(const fs::path& dir) {
  const auto rows = parse_csv(read_text(dir / "meta.csv"));
  if (rows.empty()) throw DataError((dir / "meta.csv").string() + ": empty file");
  const auto idx = header_index(rows.front());
  const std::string what = (dir / "meta.csv").string();
  const std::size_t c_id = column(idx, "id", what);
  const std::size_t c_probe = column(idx, "probe", what);
  const std::size_t c_ar = column(idx, "apex_row", what);
  const std::size_t c_ac = column(idx, "apex_col", what);
  const std::size_t c_tr = column(idx, "cross_top_row", what);
  const std::size_t c_tc = column(idx, "cross_top_col", what);
  const std::size_t c_br = column(idx, "cross_bottom_row", what);
  const std::size_t c_bc = column(idx, "cross_bottom_col", what);

  DatasetLoad out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() != rows.front().size()) {
      out.errors.push_back(what + ": row " + std::to_string(r + 1) + " has " + std::to_string(f.size()) + " fields");
      continue;
    }
    try {
      Sample s;
      s.id = f[c_id];
      s.probe = probe_from_string(f[c_probe]);
      const auto ar = optional_double(f[c_ar]);
      const auto ac = optional_double(f[c_ac]);
      if (ar && ac) s.apex = Point{*ar, *ac};
      if (!f[c_tr].empty() && !f[c_tc].empty() && !f[c_br].empty() && !f[c_bc].empty())
        s.crosses = {{parse_int(f[c_tr]), parse_int(f[c_tc])}, {parse_int(f[c_br]), parse_int(f[c_bc])}};
      s.image = read_pgm(dir / "images" / (s.id + ".pgm"));
      s.mask = read_mask_pgm(dir / "masks" / (s.id + ".pgm"));
      if (s.mask.rows() != s.image.rows() || s.mask.cols() != s.image.cols())
        throw DataError(s.id + ": image and mask differ in size");
      out.samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      out.errors.push_back(e.what());
    }
  }
  return out;
}

std::vector<Sample> read_dataset(const fs::path& dir) {
  DatasetLoad load = load_dataset(dir);
  if (!load.errors.empty()) throw DataError(load.errors.front());
  if (load.samples.empty()) throw DataError(dir.string() + ": dataset has no samples");
  return std::move(load.samples);
}

std::string encode_weights(const std::vector<NamedTensor>& tensors) {
  std::string out = "EFSG";
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    const Shape& s = t.tensor.shape();
    put_u32(out, 4);
    for (Index d : {s.n, s.c, s.h, s.w}) put_u32(out, static_cast<std::uint32_t>(d));
    for (Index k = 0; k < t.tensor.size(); ++k) put_u32(out, std::bit_cast<std::uint32_t>(t.tensor.data()[k]));
  }
  return out;
}

std::vector<NamedTensor> decode_weights(const std::string& bytes) {
  Reader rd{bytes};
  if (rd.bytes(4) != "EFSG") throw DataError("weights: bad magic");
  const std::uint32_t version = rd.u32();
  if (version != 1) throw DataError("weights: unsupported version " + std::to_string(version));
  const std::uint32_t count = rd.u32();
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = rd.bytes(rd.u32());
    const std::uint32_t rank = rd.u32();
    if (rank != 4) throw DataError("weights: tensor '" + t.name + "' has rank " + std::to_string(rank));
    Shape s;
    s.n = rd.u32();
    s.c = rd.u32();
    s.h = rd.u32();
    s.w = rd.u32();
    rd.need(static_cast<std::size_t>(s.size()) * 4);
    t.tensor = Tensorf::uninitialized(s);
    for (Index k = 0; k < s.size(); ++k) t.tensor.data()[k] = std::bit_cast<float>(rd.u32());
    out.push_back(std::move(t));
  }
  if (rd.i != bytes.size()) throw DataError("weights: trailing bytes after the last tensor");
  return out;
}

void save_weights(const fs::path& path, const Model<float>& model) {
  std::vector<NamedTensor> tensors;
  for (std::size_t i = 0; i < model.params().size(); ++i) tensors.push_back({model.names()[i], model.params()[i]});
  write_text(path, encode_weights(tensors));
}

std::vector<NamedTensor> read_weights(const fs::path& path) { return decode_weights(read_text(path)); }

void load_weights(const fs::path& path, Model<float>& model) {
  const auto tensors = read_weights(path);
  if (tensors.size() != model.params().size())
    throw DataError("weights: file has " + std::to_string(tensors.size()) + " tensors, model expects " +
                    std::to_string(model.params().size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name != model.names()[i])
      throw DataError("weights: expected tensor '" + model.names()[i] + "', found '" + tensors[i].name + "'");
    if (tensors[i].tensor.shape() != model.params()[i].shape())
      throw DataError("weights: tensor '" + tensors[i].name + "' has dims " + tensors[i].tensor.shape().str());
    model.params()[i] = tensors[i].tensor;
  }
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::string metrics_csv(std::span<const MetricsRecord> records) {
  std::string out = "id,variant,fold,dsc,abs_area_error_pct,area_bias_pct\n";
  const double nan = std::nan("");
  for (const auto& r : records)
    out += r.id + "," + r.variant + "," + std::to_string(r.fold) + "," + format_double(r.dsc) + "," +
           format_double(r.abs_area_error_pct.value_or(nan)) + "," + format_double(r.area_bias_pct.value_or(nan)) +
           "\n";
  return out;
}

std::vector<MetricsRecord> parse_metrics_csv(const std::string& text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw DataError("metrics CSV is empty");
  const auto idx = header_index(rows.front());
  const std::string what = "metrics CSV";
  const std::size_t c_id = column(idx, "id", what);
  const std::size_t c_var = column(idx, "variant", what);
  const std::size_t c_fold = column(idx, "fold", what);
  const std::size_t c_dsc = column(idx, "dsc", what);
  const std::size_t c_err = column(idx, "abs_area_error_pct", what);
  const std::size_t c_bias = column(idx, "area_bias_pct", what);
  if (rows.size() < 2) throw DataError("metrics CSV has no records");

  std::vector<MetricsRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() != rows.front().size())
      throw DataError("metrics CSV: row " + std::to_string(r + 1) + " has " + std::to_string(f.size()) + " fields");
    MetricsRecord m;
    m.id = f[c_id];
    m.variant = f[c_var];
    m.fold = parse_int(f[c_fold]);
    m.dsc = parse_double(f[c_dsc]);
    const double err = parse_double(f[c_err]);
    const double bias = parse_double(f[c_bias]);
    if (!std::isnan(err)) m.abs_area_error_pct = err;
    if (!std::isnan(bias)) m.area_bias_pct = bias;
    out.push_back(std::move(m));
  }
  return out;
}

std::string train_log_csv(const TrainLog& log) {
  std::string out = "epoch,mean_loss,lr\n";
  for (const auto& e : log.epochs)
    out += std::to_string(e.epoch) + "," + format_double(e.mean_loss) + "," + format_double(e.lr) + "\n";
  return out;
}

std::string folds_csv(const CVResult& cv) {
  std::string out = "id,fold\n";
  std::vector<std::pair<std::string, int>> rows;
  for (int f = 0; f < cv.split.k(); ++f)
    for (const auto& id : cv.split.folds[f]) rows.emplace_back(id, f);
  std::sort(rows.begin(), rows.end());
  for (const auto& [id, f] : rows) out += id + "," + std::to_string(f) + "\n";
  return out;
}

}  // namespace effseg
