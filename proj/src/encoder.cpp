#include "rci/encoder.hpp"

#include "rci/binio.hpp"

namespace rci {

namespace {

constexpr std::string_view kEncoderMagic = "RCI1";

void write_tensor(std::vector<std::uint8_t>& out, const Mat<float>& m, bool is_vector) {
  if (is_vector) {
    binio::put_u32(out, 1);
    binio::put_u32(out, static_cast<std::uint32_t>(m.cols()));
  } else {
    binio::put_u32(out, 2);
    binio::put_u32(out, static_cast<std::uint32_t>(m.rows()));
    binio::put_u32(out, static_cast<std::uint32_t>(m.cols()));
  }
  binio::put_bytes(out, m.data(), sizeof(float) * static_cast<std::size_t>(m.size()));
}

void read_tensor(binio::Reader& in, const std::string& name, Mat<float>& m, bool is_vector) {
  const std::uint32_t rank = in.u32();
  const std::uint32_t want_rank = is_vector ? 1 : 2;
  if (rank != want_rank) {
    throw FormatError("checkpoint tensor " + name + ": rank " + std::to_string(rank) +
                      ", expected " + std::to_string(want_rank));
  }
  std::uint32_t rows = 1;
  if (!is_vector) rows = in.u32();
  const std::uint32_t cols = in.u32();
  if (rows != m.rows() || cols != m.cols()) {
    throw FormatError("checkpoint tensor " + name + ": shape mismatch, found " +
                      std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                      std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  in.get_bytes(m.data(), sizeof(float) * static_cast<std::size_t>(m.size()));
  if (!m.allFinite()) throw FormatError("checkpoint tensor " + name + " has non-finite values");
}

}  // namespace

void write_encoder(std::vector<std::uint8_t>& out, const EncoderModel& model) {
  const auto& c = model.config();
  binio::put_bytes(out, kEncoderMagic.data(), kEncoderMagic.size());
  binio::put_u8(out, kEncoderFormatVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(c.tokenizer.bucket_count));
  binio::put_u32(out, c.tokenizer.lowercase ? 1 : 0);
  binio::put_u32(out, static_cast<std::uint32_t>(c.d_model));
  binio::put_u32(out, static_cast<std::uint32_t>(c.n_layers));
  binio::put_u32(out, static_cast<std::uint32_t>(c.n_heads));
  binio::put_u32(out, static_cast<std::uint32_t>(c.d_ff));
  binio::put_u32(out, static_cast<std::uint32_t>(c.max_len));
  binio::put_u64(out, c.seed);
  model.params().for_each([&](const std::string&, const char*, const Mat<float>& m,
                              bool is_vector) { write_tensor(out, m, is_vector); });
}

EncoderModel read_encoder(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  binio::Reader in(bytes, pos, "encoder checkpoint");
  in.expect_magic(kEncoderMagic);
  const std::uint8_t version = in.u8();
  if (version != kEncoderFormatVersion) {
    throw FormatError("encoder checkpoint version mismatch: expected " +
                      std::to_string(kEncoderFormatVersion) + ", found " +
                      std::to_string(version));
  }
  EncoderConfig c;
  c.tokenizer.bucket_count = static_cast<int>(in.u32());
  c.tokenizer.lowercase = in.u32() != 0;
  c.d_model = static_cast<int>(in.u32());
  c.n_layers = static_cast<int>(in.u32());
  c.n_heads = static_cast<int>(in.u32());
  c.d_ff = static_cast<int>(in.u32());
  c.max_len = static_cast<int>(in.u32());
  c.seed = in.u64();
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("encoder checkpoint has invalid config: ") + e.what());
  }
  auto params = EncoderParams<float>::zeros(c);
  params.for_each([&](const std::string& name, const char*, Mat<float>& m, bool is_vector) {
    read_tensor(in, name, m, is_vector);
  });
  return EncoderModel(c, std::move(params));
}

void save_encoder(const EncoderModel& model, const std::string& path) {
  std::vector<std::uint8_t> bytes;
  write_encoder(bytes, model);
  binio::write_file_atomic(path, bytes);
}

EncoderModel load_encoder(const std::string& path) {
  const auto bytes = binio::read_file(path);
  std::size_t pos = 0;
  auto model = read_encoder(bytes, pos);
  if (pos != bytes.size()) throw FormatError("encoder checkpoint: trailing bytes in " + path);
  return model;
}

EncoderModel load_encoder(const std::string& path, const EncoderConfig& expected) {
  auto model = load_encoder(path);
  const auto& c = model.config();
  if (c.d_model != expected.d_model || c.n_layers != expected.n_layers ||
      c.n_heads != expected.n_heads || c.d_ff != expected.d_ff ||
      c.max_len != expected.max_len || !(c.tokenizer == expected.tokenizer)) {
    throw FormatError("encoder checkpoint shape mismatch: file has d_model " +
                      std::to_string(c.d_model) + ", n_layers " + std::to_string(c.n_layers) +
                      "; expected d_model " + std::to_string(expected.d_model) +
                      ", n_layers " + std::to_string(expected.n_layers));
  }
  return model;
}

}  // namespace rci
