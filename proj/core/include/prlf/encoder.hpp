#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "prlf/dataset.hpp"
#include "prlf/modality.hpp"
#include "prlf/tape.hpp"

namespace prlf {

// Encoded modality: K x D token matrix. A non-live feature is exactly zero.
struct TokenFeature {
    Var tokens;
    Modality modality = Modality::L;
    bool live = false;
};

// K x T mask-aware segment-mean matrix. Segment k covers frames
// [floor(kT/K), floor((k+1)T/K)); each live frame in it gets weight 1/(live frames in
// the segment). Segments without live frames are all-zero rows.
DenseArray segment_pooling(std::span<const std::uint8_t> mask, std::size_t tokens);

// Per-frame bias-free projection to D, ReLU, then segment pooling into K tokens.
// `projection` is the d_m x D weight.
TokenFeature encode(Tape& tape, const ModalitySequence& seq, Var projection, Modality m, std::size_t tokens);

// Mean over token rows: K x D -> 1 x D.
Var pool(const TokenFeature& feature);

}  // namespace prlf
