#include "mid/io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mid {

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put<std::uint64_t>(out, bits);
}

template <typename T>
T get(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

double get_f64(const std::uint8_t* p) {
  std::uint64_t bits = get<std::uint64_t>(p);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

std::vector<std::uint8_t> tensor_to_bytes(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + 8 * t.rank() + 8 * t.numel());
  out.push_back('M');
  out.push_back('I');
  out.push_back('D');
  out.push_back('T');
  put<std::uint16_t>(out, kTensorFormatVersion);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(t.rank()));
  for (auto d : t.shape) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
  for (double v : t.data) put_f64(out, v);
  return out;
}

Tensor tensor_from_bytes(const std::uint8_t* data, std::size_t size, std::size_t* consumed) {
  if (size < 8 || std::memcmp(data, "MIDT", 4) != 0)
    throw DataError("tensor: bad magic (expected MIDT)");
  const auto version = get<std::uint16_t>(data + 4);
  if (version > kTensorFormatVersion)
    throw DataError("tensor: unsupported format version " + std::to_string(version));
  const auto rank = get<std::uint16_t>(data + 6);
  std::size_t off = 8;
  if (size < off + 8 * rank) throw DataError("tensor: truncated header");
  std::vector<std::size_t> shape(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    shape[i] = static_cast<std::size_t>(get<std::uint64_t>(data + off));
    off += 8;
  }
  const std::size_t n = Tensor::numel_of(shape);
  if (size < off + 8 * n) throw DataError("tensor: truncated payload");
  std::vector<double> vals(n);
  for (std::size_t i = 0; i < n; ++i) {
    vals[i] = get_f64(data + off);
    off += 8;
  }
  if (consumed) *consumed = off;
  return Tensor(std::move(shape), std::move(vals));
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  auto bytes = tensor_to_bytes(t);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("write failed: " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  std::size_t consumed = 0;
  Tensor t = tensor_from_bytes(bytes.data(), bytes.size(), &consumed);
  if (consumed != bytes.size())
    throw DataError("tensor: trailing bytes in " + path.string());
  return t;
}

void write_pgm(const std::filesystem::path& path, const Tensor& image) {
  std::size_t h, w;
  const double* px = image.data.data();
  if (image.rank() == 2) {
    h = image.shape[0];
    w = image.shape[1];
  } else if (image.rank() == 3 && image.shape[0] == 1) {
    h = image.shape[1];
    w = image.shape[2];
  } else {
    throw ConfigError("write_pgm: expected [H,W] or [1,H,W], got " +
                      shape_to_string(image.shape));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  f << "P5\n" << w << " " << h << "\n255\n";
  for (std::size_t i = 0; i < h * w; ++i) {
    double v = std::clamp(px[i], 0.0, 1.0);
    f.put(static_cast<char>(static_cast<int>(v * 255.0 + 0.5)));
  }
}

void write_points_csv(const std::filesystem::path& path, const Tensor& points,
                      const std::vector<int>& labels) {
  if (points.rank() != 2 || points.shape[1] != 2)
    throw ConfigError("points csv: expected [N,2], got " + shape_to_string(points.shape));
  if (!labels.empty() && labels.size() != points.shape[0])
    throw ConfigError("points csv: label count mismatch");
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  f << "x,y,label\n";
  f.precision(17);
  for (std::size_t i = 0; i < points.shape[0]; ++i) {
    f << points.at2(i, 0) << "," << points.at2(i, 1) << ","
      << (labels.empty() ? 0 : labels[i]) << "\n";
  }
}

PointsCsv read_points_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(f, line) || line.rfind("x,y", 0) != 0)
    throw DataError("points csv: missing header in " + path.string());
  std::vector<double> xy;
  std::vector<int> labels;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ','))
      throw DataError("points csv: malformed row '" + line + "'");
    std::getline(ss, c, ',');
    xy.push_back(std::stod(a));
    xy.push_back(std::stod(b));
    labels.push_back(c.empty() ? 0 : std::stoi(c));
  }
  Tensor pts({labels.size(), 2}, std::move(xy));
  return {std::move(pts), std::move(labels)};
}

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

}  // namespace mid
