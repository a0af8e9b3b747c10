#pragma once

// Versioned binary checkpoint: magic "FYS1", vocabulary as length-prefixed
// UTF-8 tokens, hyperparameters, then each parameter tensor as row-major
// 64-bit little-endian floats with explicit dimensions.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "fyseq/errors.hpp"
#include "fyseq/model.hpp"

namespace fyseq {
namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError("checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw DataError("checkpoint truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline void put_matrix(std::ostream& os, const Matrix& m) {
  put_u32(os, static_cast<std::uint32_t>(m.rows));
  put_u32(os, static_cast<std::uint32_t>(m.cols));
  for (double v : m.data) put_f64(os, v);
}

inline Matrix get_matrix(std::istream& is) {
  const std::uint32_t rows = get_u32(is);
  const std::uint32_t cols = get_u32(is);
  Matrix m(rows, cols);
  for (double& v : m.data) v = get_f64(is);
  return m;
}

}  // namespace detail

inline void save_checkpoint(const Seq2SeqModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path);
  os.write("FYS1", 4);

  detail::put_u32(os, static_cast<std::uint32_t>(model.vocab.size()));
  for (const std::string& tok : model.vocab.tokens()) {
    detail::put_u32(os, static_cast<std::uint32_t>(tok.size()));
    os.write(tok.data(), static_cast<std::streamsize>(tok.size()));
  }

  detail::put_u32(os, static_cast<std::uint32_t>(model.dims.embed_dim));
  detail::put_u32(os, static_cast<std::uint32_t>(model.dims.hidden_dim));
  detail::put_u32(os, static_cast<std::uint32_t>(model.dims.context_len));
  detail::put_f64(os, model.smoothing.alpha.value());
  detail::put_f64(os, model.smoothing.epsilon);
  if (model.smoothing.smoothing_distribution) {
    os.put(1);
    const auto& r = model.smoothing.smoothing_distribution->probabilities;
    detail::put_u32(os, static_cast<std::uint32_t>(r.size()));
    for (double v : r) detail::put_f64(os, v);
  } else {
    os.put(0);
  }

  detail::put_matrix(os, model.source_embeddings);
  detail::put_matrix(os, model.target_embeddings);
  detail::put_matrix(os, model.attention_query);
  detail::put_matrix(os, model.hidden_weights);
  detail::put_matrix(os, model.hidden_bias);
  detail::put_matrix(os, model.output_weights);
  detail::put_matrix(os, model.output_bias);
  if (!os) throw DataError("failed writing checkpoint: " + path);
}

inline Seq2SeqModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "FYS1")
    throw DataError("not a FYS1 checkpoint: " + path);

  const std::uint32_t count = detail::get_u32(is);
  Vocabulary vocab;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = detail::get_u32(is);
    std::string tok(len, '\0');
    if (!is.read(tok.data(), len)) throw DataError("checkpoint truncated");
    if (i < 3) {
      if (tok != vocab.token(static_cast<int>(i)))
        throw DataError("checkpoint vocabulary lacks reserved tokens");
    } else {
      vocab.add(tok);
    }
  }
  if (vocab.size() != count) throw DataError("checkpoint vocabulary has duplicate tokens");

  ModelDims dims;
  dims.embed_dim = detail::get_u32(is);
  dims.hidden_dim = detail::get_u32(is);
  dims.context_len = detail::get_u32(is);
  const double alpha = detail::get_f64(is);
  const double epsilon = detail::get_f64(is);
  const int kind = is.get();
  std::optional<TargetDistribution> r;
  if (kind == 1) {
    const std::uint32_t len = detail::get_u32(is);
    std::vector<double> probs(len);
    for (double& v : probs) v = detail::get_f64(is);
    r = TargetDistribution::general(std::move(probs));
  } else if (kind != 0) {
    throw DataError("checkpoint has unknown smoothing kind");
  }

  Seq2SeqModel model(std::move(vocab), dims, SmoothingSpec(Alpha(alpha), epsilon, std::move(r)));
  model.source_embeddings = detail::get_matrix(is);
  model.target_embeddings = detail::get_matrix(is);
  model.attention_query = detail::get_matrix(is);
  model.hidden_weights = detail::get_matrix(is);
  model.hidden_bias = detail::get_matrix(is);
  model.output_weights = detail::get_matrix(is);
  model.output_bias = detail::get_matrix(is);

  const std::size_t V = model.vocab.size(), d = model.dims.embed_dim, h = model.dims.hidden_dim;
  if (model.source_embeddings.rows != V || model.source_embeddings.cols != d ||
      model.target_embeddings.rows != V || model.target_embeddings.cols != d ||
      model.attention_query.rows != d || model.attention_query.cols != d ||
      model.hidden_weights.rows != h ||
      model.hidden_weights.cols != (model.dims.context_len + 1) * d ||
      model.hidden_bias.rows != h || model.output_weights.rows != V ||
      model.output_weights.cols != h || model.output_bias.rows != V)
    throw DataError("checkpoint tensor dimensions do not match hyperparameters");
  return model;
}

}  // namespace fyseq
