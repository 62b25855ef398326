#include "prlf/encoder.hpp"

#include "prlf/error.hpp"
#include "prlf/ops.hpp"

namespace prlf {

DenseArray segment_pooling(std::span<const std::uint8_t> mask, std::size_t tokens) {
    require(tokens >= 1, "segment_pooling: need at least one token");
    const std::size_t frames = mask.size();
    require(frames >= 1, "segment_pooling: empty sequence");
    DenseArray p = DenseArray::matrix(tokens, frames);
    for (std::size_t k = 0; k < tokens; ++k) {
        const std::size_t begin = k * frames / tokens, end = (k + 1) * frames / tokens;
        std::size_t live = 0;
        for (std::size_t t = begin; t < end; ++t) live += mask[t] ? 1 : 0;
        if (live == 0) continue;
        for (std::size_t t = begin; t < end; ++t)
            if (mask[t]) p(k, t) = 1.0 / static_cast<double>(live);
    }
    return p;
}

TokenFeature encode(Tape& tape, const ModalitySequence& seq, Var projection, Modality m, std::size_t tokens) {
    require(seq.mask.size() == seq.length(), "encode: mask length differs from frame count");
    require(projection.rows() == seq.dim(), "encode: projection rows differ from the modality's feature size");
    const std::size_t width = projection.cols();
    if (!seq.live()) return TokenFeature{tape.constant(DenseArray::matrix(tokens, width)), m, false};

    Var frames = tape.constant(seq.frames);
    Var hidden = ops::relu(ops::matmul(frames, projection));
    Var pooling = tape.constant(segment_pooling(seq.mask, tokens));
    return TokenFeature{ops::matmul(pooling, hidden), m, true};
}

Var pool(const TokenFeature& feature) { return ops::mean_rows(feature.tokens); }

}  // namespace prlf
