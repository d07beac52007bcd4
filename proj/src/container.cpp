#include "notesplit/container.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "notesplit/error.hpp"

namespace notesplit {

namespace {

constexpr char kMagic[8] = {'N', 'S', 'P', 'L', 'T', 'M', 'D', 'L'};

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

template <class T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("model file truncated");
  return value;
}

}  // namespace

const Matrix& ModelContainer::matrix(const std::string& name) const {
  auto it = matrices.find(name);
  if (it == matrices.end()) throw IoError("model file has no matrix '" + name + "'");
  return it->second;
}

void save_container(const ModelContainer& container, const std::filesystem::path& path) {
  nlohmann::json header = {{"version", kContainerVersion}, {"kind", container.kind}, {"meta", container.meta}};
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& [name, m] : container.matrices)
    shapes.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  header["matrices"] = shapes;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kContainerVersion);
  write_pod<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, m] : container.matrices)
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

ModelContainer load_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw IoError(path.string() + " is not a model file");
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kContainerVersion) throw IoError("unsupported model file version " + std::to_string(version));
  const auto length = read_pod<std::uint64_t>(in);
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw IoError("model file truncated");

  ModelContainer container;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    if (header.at("version").get<int>() != kContainerVersion) throw IoError("model header version mismatch");
    container.kind = header.at("kind").get<std::string>();
    container.meta = header.at("meta");
    for (const auto& shape : header.at("matrices")) {
      const auto rows = shape.at("rows").get<Eigen::Index>();
      const auto cols = shape.at("cols").get<Eigen::Index>();
      Matrix m(rows, cols);
      in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
      if (!in) throw IoError("model file truncated");
      container.matrices.emplace(shape.at("name").get<std::string>(), std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad model header: ") + e.what());
  }
  return container;
}

}  // namespace notesplit
