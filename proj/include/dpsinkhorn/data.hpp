#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpsinkhorn/matrix.hpp"
#include "dpsinkhorn/rng.hpp"

namespace dpsinkhorn {

// Dataset ingestion (IDX image files, synthetic labeled mixtures),
// normalization to the generator's tanh range, and Poisson subsampling.

// Affine map recorded by synth_mixture; coordinate k of a raw draw maps to
// raw[k]·scale[k] + offset[k].
struct AffineTransform {
    Vector scale;
    Vector offset;
};

struct Dataset {
    Matrix samples;                // M×d, entries in [−1,1]
    std::vector<uint32_t> labels;  // M class ids in {0..L−1}
    size_t L = 0;                  // class count
    std::string provenance;        // human-readable origin tag
    AffineTransform transform;     // recorded squash (synth_mixture only)
};

// Independent Bernoulli(q) inclusion of every index in [0,M). One uniform
// draw is consumed per index, so the stream advances by exactly M.
std::vector<size_t> poisson_sample(size_t M, double q, CounterRng& rng);

// Raw IDX tensor: unsigned-byte payload with big-endian dimension header.
struct IdxTensor {
    std::vector<uint32_t> dims;
    std::vector<uint8_t> payload;  // row-major

    size_t count() const { return dims.empty() ? 0 : dims[0]; }
    size_t item_size() const;
};

// Parses an IDX file bit-exactly: magic 0x00 0x00, type code (only 0x08
// unsigned byte supported), dimension-count byte, big-endian u32 dims,
// row-major payload. Failure modes are distinct types: IdxBadMagicError,
// IdxUnsupportedTypeError, IdxTruncatedError (with expected vs actual byte
// counts); missing files raise IoError.
IdxTensor read_idx(const std::string& path);

// Writes the same format; read_idx(write_idx(t)) round-trips bit-exactly.
void write_idx(const std::string& path, const IdxTensor& t);

// Byte v ∈ [0,255] ↦ v/127.5 − 1 ∈ [−1,1]; 255 maps to exactly 1.0.
double normalize_byte(uint8_t v);
Matrix normalize(const IdxTensor& t);  // one row per leading-dim item

// Inverse with round-half-down so 0.0 ↦ 127 (and denormalize(normalize(v))=v
// for all 256 byte values). Clamped to [0,255].
uint8_t denormalize(double v);

// Deterministic bilinear resize of square images (rows of `images`, each a
// flattened side×side raster) to out_side×out_side. Sample positions follow
// the half-pixel convention src = (dst+0.5)·(in/out) − 0.5 with edge
// clamping; resizing to the same side is the identity. Throws
// ValidationError when rows are not square rasters.
Matrix downsample(const Matrix& images, size_t out_side);

// One Gaussian mixture component in 2D.
struct MixtureComponent {
    double mean[2];
    double cov[2][2];   // symmetric positive definite
    uint32_t class_id;
    double weight;      // weights sum to 1
};

// Labeled mixture draws, affinely squashed into [−1,1]² by a recorded
// transform (the bounding-box map of the drawn batch). Throws
// ValidationError for non-PD covariances or weights not summing to 1.
Dataset synth_mixture(const std::vector<MixtureComponent>& components, size_t count, CounterRng& rng);

// Rows of `ds` at the given indices, as a new dataset (shared metadata).
Dataset subset(const Dataset& ds, const std::vector<size_t>& indices);

// The default 3-class benchmark mixture used by the desk-scale runs.
std::vector<MixtureComponent> default_mixture_spec();

}  // namespace dpsinkhorn
