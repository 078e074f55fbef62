#include "gedfn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <string>
#include <string_view>

#include "gedfn/errors.hpp"
#include "gedfn/io.hpp"

namespace gedfn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are raw little-endian");

namespace {

constexpr std::string_view kMagic = "GEDFNCK1";

template <typename T>
void append_raw(std::string& out, const T* data, std::size_t count) {
  out.append(reinterpret_cast<const char*>(data), count * sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  void read(T* data, std::size_t count) {
    const std::size_t size = count * sizeof(T);
    if (pos_ + size > bytes_.size()) throw IngestionError("checkpoint: truncated payload");
    if (size > 0) std::memcpy(data, bytes_.data() + pos_, size);
    pos_ += size;
  }
  std::string_view take(std::size_t size) {
    if (pos_ + size > bytes_.size()) throw IngestionError("checkpoint: truncated header");
    std::string_view out(bytes_.data() + pos_, size);
    pos_ += size;
    return out;
  }
  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

nlohmann::json shapes(const ModelParams& params) {
  auto arr = nlohmann::json::array();
  for (const auto& l : params.layers) {
    arr.push_back({{"weight_rows", l.weight.rows()},
                   {"weight_cols", l.weight.cols()},
                   {"values", l.values.size()},
                   {"bias", l.bias.size()}});
  }
  return arr;
}

void append_params(std::string& out, const ModelParams& params) {
  for (const auto& l : params.layers) {
    append_raw(out, l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    append_raw(out, l.values.data(), static_cast<std::size_t>(l.values.size()));
    append_raw(out, l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
}

ModelParams read_params(Reader& in, const nlohmann::json& layout) {
  ModelParams p;
  for (const auto& s : layout) {
    LayerParams l;
    l.weight.resize(s.at("weight_rows").get<Eigen::Index>(), s.at("weight_cols").get<Eigen::Index>());
    l.values.resize(s.at("values").get<Eigen::Index>());
    l.bias.resize(s.at("bias").get<Eigen::Index>());
    in.read(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    in.read(l.values.data(), static_cast<std::size_t>(l.values.size()));
    in.read(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    p.layers.push_back(std::move(l));
  }
  return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  nlohmann::json header;
  header["format"] = "gedfn-checkpoint";
  header["version"] = 1;
  header["input_dim"] = ck.spec.input_dim;
  header["hidden"] = ck.spec.hidden;
  header["dropout_rate"] = ck.spec.dropout_rate;
  header["seed"] = ck.seed;
  header["adam_step"] = ck.optimizer.step;
  header["layers"] = shapes(ck.params);
  header["has_optimizer"] = !ck.optimizer.m.layers.empty();
  if (ck.spec.mask) {
    header["mask"] = {{"size", ck.spec.mask->size()},
                      {"nnz", ck.spec.mask->nnz()},
                      {"fingerprint", hex64(ck.spec.mask->fingerprint())}};
  }
  header["metadata"] = ck.metadata;
  const std::string text = header.dump();

  std::string out(kMagic);
  const std::uint64_t len = text.size();
  append_raw(out, &len, 1);
  out += text;
  if (ck.spec.mask) {
    std::vector<std::uint64_t> offsets(ck.spec.mask->offsets().begin(), ck.spec.mask->offsets().end());
    std::vector<std::int32_t> columns(ck.spec.mask->columns().begin(), ck.spec.mask->columns().end());
    append_raw(out, offsets.data(), offsets.size());
    append_raw(out, columns.data(), columns.size());
  }
  append_params(out, ck.params);
  if (!ck.optimizer.m.layers.empty()) {
    append_params(out, ck.optimizer.m);
    append_params(out, ck.optimizer.v);
  }
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader in(read_file(path));
  if (in.take(kMagic.size()) != kMagic) throw IngestionError("checkpoint: bad magic in " + path.string());
  std::uint64_t len = 0;
  in.read(&len, 1);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.take(len));
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("checkpoint: bad header: ") + e.what());
  }

  Checkpoint ck;
  try {
    ck.spec.input_dim = header.at("input_dim").get<int>();
    ck.spec.hidden = header.at("hidden").get<std::vector<int>>();
    ck.spec.dropout_rate = header.at("dropout_rate").get<double>();
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.metadata = header.at("metadata");
    if (header.contains("mask")) {
      const auto& m = header["mask"];
      const int size = m.at("size").get<int>();
      const std::size_t nnz = m.at("nnz").get<std::size_t>();
      std::vector<std::uint64_t> offsets(static_cast<std::size_t>(size) + 1);
      std::vector<std::int32_t> columns(nnz);
      in.read(offsets.data(), offsets.size());
      in.read(columns.data(), columns.size());
      auto mask = AdjacencyMatrix::from_rows(size, {offsets.begin(), offsets.end()},
                                             {columns.begin(), columns.end()});
      if (hex64(mask.fingerprint()) != m.at("fingerprint").get<std::string>()) {
        throw IngestionError("checkpoint: mask fingerprint mismatch");
      }
      ck.spec.mask = std::move(mask);
    }
    ck.params = read_params(in, header.at("layers"));
    if (header.at("has_optimizer").get<bool>()) {
      ck.optimizer.m = read_params(in, header["layers"]);
      ck.optimizer.v = read_params(in, header["layers"]);
      ck.optimizer.step = header.at("adam_step").get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("checkpoint: bad header: ") + e.what());
  } catch (const ParameterError& e) {
    throw IngestionError(std::string("checkpoint: bad mask: ") + e.what());
  }
  if (!in.done()) throw IngestionError("checkpoint: trailing bytes in " + path.string());
  Network(ck.spec).check_params(ck.params);
  return ck;
}

}  // namespace gedfn
