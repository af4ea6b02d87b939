#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "actionkit/records.hpp"

namespace actionkit {

/// Id-indexed dense vectors. Rows share one dimension D >= 2, all entries
/// are finite and ids are unique; the constructor enforces this.
class EmbeddingSet {
public:
    EmbeddingSet() = default;
    EmbeddingSet(std::vector<std::string> ids, Eigen::MatrixXd vectors);
    EmbeddingSet(std::vector<std::string> ids, const std::vector<std::vector<double>>& rows);

    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors_.cols()); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const Eigen::MatrixXd& vectors() const noexcept { return vectors_; }

private:
    std::vector<std::string> ids_;
    Eigen::MatrixXd vectors_;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

enum class Projection {
    kPca,          // top-2 principal directions of the centred data
    kPassthrough,  // input is already 2-D (e.g. an external UMAP/t-SNE run)
};

struct Projected {
    std::vector<Point2> points;
    std::optional<std::string> warning;  // set when the data had rank < 2
};

/// Linear 2-D projection fitted on one set and applicable to others, so that
/// generated batches land in the coordinate frame of the real data.
class Projector {
public:
    /// Throws DimensionMismatch (passthrough with D != 2, or N < 2 for PCA).
    static Projector fit(const Eigen::MatrixXd& data, Projection method);

    /// Throws DimensionMismatch when the column count differs from the fit.
    std::vector<Point2> transform(const Eigen::MatrixXd& data) const;

    Projection method() const noexcept { return method_; }
    std::size_t rank() const noexcept { return rank_; }
    const std::optional<std::string>& warning() const noexcept { return warning_; }

private:
    Projection method_ = Projection::kPassthrough;
    std::size_t dim_ = 2;
    std::size_t rank_ = 2;
    Eigen::RowVectorXd mean_;
    Eigen::MatrixXd axes_;  // D x 2
    std::optional<std::string> warning_;
};

/// PCA components get a deterministic sign: the first nonzero loading of
/// each axis is positive.
Projected project_2d(const EmbeddingSet& emb, Projection method);

struct Bounds {
    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;

    friend bool operator==(const Bounds&, const Bounds&) = default;
};

/// Bounding box of both point sets, widened by `margin` of the extent on
/// every side. Degenerate extents are widened to unit width.
Bounds union_bounds(std::span<const Point2> a, std::span<const Point2> b, double margin = 0.01);

/// Probability grid, row-major with `nx` columns and `ny` rows.
struct Density2D {
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::vector<double> cells;
    Bounds bounds;

    double at(std::size_t ix, std::size_t iy) const { return cells[iy * nx + ix]; }
};

inline constexpr std::size_t kDefaultGridSize = 64;
inline constexpr double kDefaultEpsilon = 1e-9;

/// Histogram over a grid_size x grid_size grid, smoothed by adding epsilon
/// to every cell before renormalising. Without bounds the points' own box
/// (widened by 1%) is used. Throws EmptyPoints.
Density2D estimate_density(std::span<const Point2> points, std::size_t grid_size,
                           std::optional<Bounds> bounds, double epsilon = kDefaultEpsilon);

Density2D uniform_density(std::size_t grid_size, const Bounds& bounds);

/// sum p ln(p / q) in nats. Throws GridMismatch when shapes or bounds differ.
double kl_divergence(const Density2D& p, const Density2D& q);
double kl_divergence(std::span<const double> p, std::span<const double> q);

enum class DeltaMode {
    kAbsDiff,  // |KL(P_real || U) - KL(P_gen || U)| with U uniform on the grid
    kDirect,   // KL(P_real || P_gen)
};

enum class AcceptRule {
    kDeltaAtLeastTau,  // keep a batch when delta >= tau
    kDeltaBelowTau,    // keep a batch when delta < tau
};

struct SelectionConfig {
    double tau = 0.7;
    std::size_t k = 32;   // batch size
    std::size_t n = 256;  // target number of accepted records
    DeltaMode mode = DeltaMode::kAbsDiff;
    AcceptRule rule = AcceptRule::kDeltaAtLeastTau;
    Projection projection = Projection::kPca;
    std::size_t grid_size = kDefaultGridSize;
    double epsilon = kDefaultEpsilon;
    double margin = 0.01;
    std::uint64_t seed = 0;
    std::size_t max_attempts = 10000;

    /// Throws InvalidArgument on tau < 0, k == 0, k > n, grid_size < 2,
    /// epsilon <= 0 or max_attempts == 0.
    void validate() const;
};

double batch_delta(std::span<const Point2> real_pts, std::span<const Point2> gen_pts,
                   const SelectionConfig& cfg);

struct CandidateBatch {
    std::size_t id = 0;
    std::vector<CorpusRecord> records;
};

class CandidateStream {
public:
    virtual ~CandidateStream() = default;
    virtual std::optional<CandidateBatch> next() = 0;
};

/// Shuffles a candidate pool once with the seed and hands out consecutive
/// k-record batches until the pool runs dry.
class ShuffledPoolStream : public CandidateStream {
public:
    ShuffledPoolStream(std::vector<CorpusRecord> pool, std::size_t k, std::uint64_t seed);
    std::optional<CandidateBatch> next() override;

private:
    std::vector<CorpusRecord> pool_;
    std::size_t k_;
    std::size_t cursor_ = 0;
    std::size_t batch_id_ = 0;
};

/// Serves a fixed list of batches in order.
class VectorStream : public CandidateStream {
public:
    explicit VectorStream(std::vector<CandidateBatch> batches) : batches_(std::move(batches)) {}
    std::optional<CandidateBatch> next() override;

private:
    std::vector<CandidateBatch> batches_;
    std::size_t cursor_ = 0;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    /// One row per record, embedding the record's description.
    virtual Eigen::MatrixXd embed(std::span<const CorpusRecord> records) = 0;
};

/// Looks vectors up by record id; throws MissingField for unknown ids.
class LookupEmbeddingProvider : public EmbeddingProvider {
public:
    explicit LookupEmbeddingProvider(const EmbeddingSet& table);
    Eigen::MatrixXd embed(std::span<const CorpusRecord> records) override;

private:
    EmbeddingSet table_;
    std::unordered_map<std::string, Eigen::Index> row_of_;
};

struct BatchDecision {
    std::size_t batch = 0;
    double delta = 0.0;
    bool accepted = false;
};

struct SelectionResult {
    std::vector<std::size_t> accepted;  // batch ids in acceptance order
    std::size_t rejected_count = 0;
    std::vector<BatchDecision> deltas;  // every evaluated batch
    std::vector<CorpusRecord> selected;  // records of the accepted batches
    std::optional<std::string> warning;

    std::size_t attempts() const noexcept { return deltas.size(); }
    double rejection_rate() const noexcept {
        return deltas.empty() ? 0.0
                              : static_cast<double>(rejected_count) / static_cast<double>(deltas.size());
    }
};

/// Draws batches until accepted * k >= n. Every batch is embedded, projected
/// into the frame fitted on the real embeddings, and scored with
/// batch_delta. Throws Exhausted when the stream or max_attempts runs out
/// first.
SelectionResult run_selection(CandidateStream& candidates, const EmbeddingSet& real_emb,
                              EmbeddingProvider& embedder, const SelectionConfig& cfg);

}  // namespace actionkit
