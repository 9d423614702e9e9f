#include "cadinspect/mesh.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <tuple>

namespace cadinspect {
namespace {

static_assert(std::endian::native == std::endian::little, "binary STL I/O assumes little-endian");

constexpr std::size_t kHeaderBytes = 80;
constexpr std::size_t kRecordBytes = 50;
constexpr double kMergeQuantum = 1e-9;

// Collects triangle-soup corners and merges equal vertices.
class VertexWelder {
 public:
  std::uint32_t add(const Vec3& p) {
    if (!p.allFinite()) throw ParseError("STL vertex has non-finite coordinate");
    const Key key{std::llround(p.x() / kMergeQuantum), std::llround(p.y() / kMergeQuantum),
                  std::llround(p.z() / kMergeQuantum)};
    auto [it, inserted] = index_.try_emplace(key, static_cast<std::uint32_t>(vertices_.size()));
    if (inserted) vertices_.push_back(p);
    return it->second;
  }

  void add_triangle(const Vec3& a, const Vec3& b, const Vec3& c) {
    faces_.push_back({add(a), add(b), add(c)});
  }

  TriMesh finish() {
    try {
      return TriMesh(std::move(vertices_), std::move(faces_));
    } catch (const GeometryError& e) {
      throw ParseError(std::string("STL produces invalid mesh: ") + e.what());
    }
  }

 private:
  using Key = std::tuple<long long, long long, long long>;
  std::map<Key, std::uint32_t> index_;
  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
};

float read_f32(const char* p) {
  float f;
  std::memcpy(&f, p, sizeof f);
  return f;
}

std::uint32_t read_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

bool looks_binary(std::string_view bytes) {
  if (bytes.size() < kHeaderBytes + 4) return false;
  const std::uint64_t count = read_u32(bytes.data() + kHeaderBytes);
  return kHeaderBytes + 4 + count * kRecordBytes == bytes.size();
}

bool starts_with_solid(std::string_view bytes) {
  std::size_t i = 0;
  while (i < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[i]))) ++i;
  return bytes.substr(i, 5) == "solid";
}

TriMesh parse_binary(std::string_view bytes) {
  if (bytes.size() < kHeaderBytes + 4) {
    throw ParseError("truncated binary STL: " + std::to_string(bytes.size()) + " bytes");
  }
  const std::uint64_t count = read_u32(bytes.data() + kHeaderBytes);
  const std::uint64_t expected = kHeaderBytes + 4 + count * kRecordBytes;
  if (bytes.size() < expected) {
    throw ParseError("truncated binary STL: header declares " + std::to_string(count) +
                     " triangles, file holds " +
                     std::to_string((bytes.size() - kHeaderBytes - 4) / kRecordBytes));
  }
  if (bytes.size() > expected) {
    throw ParseError("binary STL triangle count mismatch: " + std::to_string(count) +
                     " declared, " + std::to_string(bytes.size() - expected) +
                     " trailing bytes");
  }
  VertexWelder welder;
  const char* rec = bytes.data() + kHeaderBytes + 4;
  for (std::uint64_t t = 0; t < count; ++t, rec += kRecordBytes) {
    Vec3 corner[3];
    for (int c = 0; c < 3; ++c) {
      const char* p = rec + 12 + 12 * c;
      corner[c] = Vec3(read_f32(p), read_f32(p + 4), read_f32(p + 8));
    }
    welder.add_triangle(corner[0], corner[1], corner[2]);
  }
  return welder.finish();
}

class Tokenizer {
 public:
  explicit Tokenizer(std::string_view text) : text_(text) {}

  std::string_view next() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  void expect(std::string_view word) {
    const auto tok = next();
    if (tok != word) {
      throw ParseError("ASCII STL: expected '" + std::string(word) + "', found '" +
                       std::string(tok) + "'");
    }
  }

  double number() {
    const auto tok = next();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError("ASCII STL: bad number '" + std::string(tok) + "'");
    }
    if (!std::isfinite(v)) throw ParseError("ASCII STL: non-finite coordinate");
    return v;
  }

  void skip_line() {
    while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

TriMesh parse_ascii(std::string_view bytes) {
  Tokenizer tok(bytes);
  tok.expect("solid");
  tok.skip_line();
  VertexWelder welder;
  for (;;) {
    const auto word = tok.next();
    if (word.empty()) throw ParseError("truncated ASCII STL: missing endsolid");
    if (word == "endsolid") break;
    if (word != "facet") throw ParseError("ASCII STL: expected 'facet', found '" + std::string(word) + "'");
    tok.expect("normal");
    for (int i = 0; i < 3; ++i) tok.number();
    tok.expect("outer");
    tok.expect("loop");
    Vec3 corner[3];
    for (auto& c : corner) {
      tok.expect("vertex");
      c.x() = tok.number();
      c.y() = tok.number();
      c.z() = tok.number();
    }
    tok.expect("endloop");
    tok.expect("endfacet");
    welder.add_triangle(corner[0], corner[1], corner[2]);
  }
  return welder.finish();
}

void append_f32(std::string& out, double v) {
  const float f = static_cast<float>(v);
  char buf[4];
  std::memcpy(buf, &f, 4);
  out.append(buf, 4);
}

}  // namespace

TriMesh parse_stl(std::string_view bytes) {
  if (looks_binary(bytes)) return parse_binary(bytes);
  if (starts_with_solid(bytes)) return parse_ascii(bytes);
  return parse_binary(bytes);
}

std::string stl_header(std::string_view bytes) {
  std::string header;
  if (looks_binary(bytes) || !starts_with_solid(bytes)) {
    header.assign(bytes.substr(0, std::min(kHeaderBytes, bytes.size())));
  } else {
    const auto start = bytes.find("solid") + 5;
    const auto end = bytes.find('\n', start);
    header.assign(bytes.substr(start, end == std::string_view::npos ? end : end - start));
  }
  while (!header.empty() && (header.back() == '\0' || std::isspace(static_cast<unsigned char>(header.back())))) {
    header.pop_back();
  }
  std::size_t lead = 0;
  while (lead < header.size() && header[lead] == ' ') ++lead;
  return header.substr(lead);
}

std::string write_stl(const TriMesh& mesh, StlFormat format, std::string_view header) {
  auto normal_of = [&](std::size_t j) -> Vec3 {
    return mesh.is_degenerate(j) ? Vec3::Zero() : mesh.face_normal(j);
  };

  if (format == StlFormat::binary) {
    std::string out(kHeaderBytes, '\0');
    std::memcpy(out.data(), header.data(), std::min(header.size(), kHeaderBytes));
    const auto count = static_cast<std::uint32_t>(mesh.num_faces());
    char buf[4];
    std::memcpy(buf, &count, 4);
    out.append(buf, 4);
    out.reserve(out.size() + kRecordBytes * mesh.num_faces());
    for (std::size_t j = 0; j < mesh.num_faces(); ++j) {
      const Vec3 n = normal_of(j);
      for (int c = 0; c < 3; ++c) append_f32(out, n[c]);
      for (auto idx : mesh.face(j)) {
        for (int c = 0; c < 3; ++c) append_f32(out, mesh.vertex(idx)[c]);
      }
      out.append(2, '\0');
    }
    return out;
  }

  const std::string name = header.empty() ? std::string("cadinspect") : std::string(header);
  std::ostringstream os;
  os.precision(17);
  os << "solid " << name << '\n';
  for (std::size_t j = 0; j < mesh.num_faces(); ++j) {
    const Vec3 n = normal_of(j);
    os << "  facet normal " << n.x() << ' ' << n.y() << ' ' << n.z() << '\n';
    os << "    outer loop\n";
    for (auto idx : mesh.face(j)) {
      const Vec3& v = mesh.vertex(idx);
      os << "      vertex " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    }
    os << "    endloop\n  endfacet\n";
  }
  os << "endsolid " << name << '\n';
  return os.str();
}

TriMesh read_stl_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open STL file " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_stl(bytes);
}

void write_stl_file(const TriMesh& mesh, const std::string& path, StlFormat format,
                    std::string_view header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write STL file " + path);
  const auto bytes = write_stl(mesh, format, header);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path);
}

}  // namespace cadinspect
