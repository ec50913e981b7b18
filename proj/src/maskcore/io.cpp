#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "osvos/error.hpp"
#include "osvos/maskcore.hpp"

namespace fs = std::filesystem;

namespace osvos {

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

struct Netpbm {
  char kind = 0;  // '5' or '6'
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::string_view data;
};

Netpbm parse_netpbm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("malformed header: expected P5 or P6 magic");
  }
  Netpbm img;
  img.kind = bytes[1];
  std::size_t pos = 2;
  auto next_int = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw FormatError("malformed header: expected integer field");
    }
    long v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000) throw FormatError("malformed header: field too large");
      ++pos;
    }
    return static_cast<int>(v);
  };
  img.width = next_int();
  img.height = next_int();
  img.maxval = next_int();
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError("malformed header: missing separator before pixel data");
  }
  ++pos;
  if (img.width < 1 || img.height < 1) throw FormatError("malformed header: non-positive dimensions");
  if (img.maxval < 1 || img.maxval > 255) throw FormatError("malformed header: maxval must be in [1,255]");
  const std::size_t channels = img.kind == '6' ? 3 : 1;
  const std::size_t need = static_cast<std::size_t>(img.width) * img.height * channels;
  if (bytes.size() - pos < need) throw FormatError("truncated pixel data");
  img.data = bytes.substr(pos, need);
  return img;
}

std::string netpbm_header(char kind, int w, int h) {
  return "P" + std::string(1, kind) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
}

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(v * 255.0)); }

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

std::uint32_t get_u32(std::string_view s, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + k])) << (8 * k);
  return v;
}

}  // namespace

std::string frame_filename(std::size_t index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu.%s", index, ext);
  return buf;
}

std::string encode_pgm(const Mask& m) {
  std::string out = netpbm_header('5', m.width(), m.height());
  out.reserve(out.size() + m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out.push_back(static_cast<char>(m[i] ? 255 : 0));
  return out;
}

Mask decode_mask(std::string_view bytes) {
  const Netpbm img = parse_netpbm(bytes);
  if (img.kind != '5') throw FormatError("malformed header: masks must be P5");
  std::vector<std::uint8_t> bits(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const int v = static_cast<unsigned char>(img.data[i]);
    if (v == 0) {
      bits[i] = 0;
    } else if (v == img.maxval) {
      bits[i] = 1;
    } else {
      throw FormatError("non-binary mask: value " + std::to_string(v) + " at pixel " + std::to_string(i));
    }
  }
  return Mask(img.width, img.height, std::move(bits));
}

Mask load_mask(const fs::path& path) {
  try {
    return decode_mask(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_mask(const Mask& m, const fs::path& path) { write_file(path, encode_pgm(m)); }

Frame load_frame(const fs::path& path) {
  const std::string bytes = read_file(path);
  Netpbm img;
  try {
    img = parse_netpbm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  const int channels = img.kind == '6' ? 3 : 1;
  const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
  std::vector<double> values(plane * channels);
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < channels; ++c) {
      const double v = static_cast<unsigned char>(img.data[i * channels + c]);
      values[c * plane + i] = v / img.maxval;
    }
  }
  return Frame(img.width, img.height, channels, std::move(values));
}

void save_frame(const Frame& f, const fs::path& path) {
  const int channels = f.channels();
  std::string out = netpbm_header(channels == 3 ? '6' : '5', f.width(), f.height());
  const std::size_t plane = f.plane_size();
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < channels; ++c) out.push_back(static_cast<char>(quantize(f.values()[c * plane + i])));
  }
  write_file(path, out);
}

std::string encode_probmap(const ProbMap& p) {
  static_assert(std::endian::native == std::endian::little, "PMAP writer assumes a little-endian host");
  std::string out = "PMAP";
  put_u32(out, static_cast<std::uint32_t>(p.width()));
  put_u32(out, static_cast<std::uint32_t>(p.height()));
  put_u32(out, 0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const float v = static_cast<float>(p[i]);
    put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

ProbMap decode_probmap(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 4) != "PMAP") throw FormatError("malformed header: expected PMAP magic");
  const std::uint32_t w = get_u32(bytes, 4);
  const std::uint32_t h = get_u32(bytes, 8);
  if (get_u32(bytes, 12) != 0) throw FormatError("malformed header: reserved field must be 0");
  if (w == 0 || h == 0 || w > 1'000'000 || h > 1'000'000) throw FormatError("malformed header: bad dimensions");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() != 16 + 4 * n) throw FormatError("probability map payload size mismatch");
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = std::bit_cast<float>(get_u32(bytes, 16 + 4 * i));
  return ProbMap(static_cast<int>(w), static_cast<int>(h), std::move(values));
}

ProbMap load_probmap(const fs::path& path) {
  try {
    return decode_probmap(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_probmap(const ProbMap& p, const fs::path& path) { write_file(path, encode_probmap(p)); }

std::vector<Mask> load_mask_dir(const fs::path& dir, std::size_t count) {
  std::vector<Mask> masks;
  masks.reserve(count);
  for (std::size_t t = 0; t < count; ++t) masks.push_back(load_mask(dir / frame_filename(t, "pgm")));
  return masks;
}

void save_mask_dir(std::span<const Mask> masks, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t t = 0; t < masks.size(); ++t) save_mask(masks[t], dir / frame_filename(t, "pgm"));
}

VideoSequence load_sequence(const fs::path& root, const std::string& name) {
  const fs::path base = root / name;
  const fs::path frames_dir = base / "frames";
  if (!fs::is_directory(frames_dir)) throw IoError("missing frames directory '" + frames_dir.string() + "'");
  VideoSequence seq;
  seq.name = name;
  for (std::size_t t = 0;; ++t) {
    const fs::path ppm = frames_dir / frame_filename(t, "ppm");
    const fs::path pgm = frames_dir / frame_filename(t, "pgm");
    if (fs::exists(ppm)) {
      seq.frames.push_back(load_frame(ppm));
    } else if (fs::exists(pgm)) {
      seq.frames.push_back(load_frame(pgm));
    } else {
      break;
    }
  }
  if (seq.frames.empty()) throw IoError("no frames found in '" + frames_dir.string() + "'");
  if (fs::is_directory(base / "gt")) seq.gt = load_mask_dir(base / "gt", seq.frames.size());
  if (fs::is_directory(base / "edges")) seq.edges = load_mask_dir(base / "edges", seq.frames.size());
  if (fs::exists(base / "attributes.txt")) {
    std::istringstream in(read_file(base / "attributes.txt"));
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
      std::size_t b = 0;
      while (b < line.size() && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
      if (b < line.size()) seq.attributes.insert(line.substr(b));
    }
  }
  seq.validate();
  return seq;
}

void save_sequence(const VideoSequence& seq, const fs::path& root) {
  seq.validate();
  const fs::path base = root / seq.name;
  fs::create_directories(base / "frames");
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const Frame& f = seq.frames[t];
    save_frame(f, base / "frames" / frame_filename(t, f.channels() == 3 ? "ppm" : "pgm"));
  }
  if (seq.gt) save_mask_dir(*seq.gt, base / "gt");
  if (seq.edges) save_mask_dir(*seq.edges, base / "edges");
  if (!seq.attributes.empty()) {
    std::string text;
    for (const auto& a : seq.attributes) text += a + "\n";
    write_file(base / "attributes.txt", text);
  }
}

std::vector<std::string> list_sequences(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("dataset root '" + root.string() + "' is not a directory");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::is_directory(entry.path() / "frames")) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace osvos
