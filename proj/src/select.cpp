#include "actionkit/select.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

#include "actionkit/error.hpp"

namespace actionkit {

EmbeddingSet::EmbeddingSet(std::vector<std::string> ids, Eigen::MatrixXd vectors)
    : ids_(std::move(ids)), vectors_(std::move(vectors)) {
    if (static_cast<Eigen::Index>(ids_.size()) != vectors_.rows()) {
        throw DimensionMismatch("embedding set has " + std::to_string(ids_.size()) + " ids but " +
                                std::to_string(vectors_.rows()) + " rows");
    }
    if (!ids_.empty() && vectors_.cols() < 2) {
        throw DimensionMismatch("embedding dimension must be at least 2");
    }
    if (!vectors_.allFinite()) throw InvalidArgument("embedding contains NaN or Inf");
    std::unordered_set<std::string> seen;
    for (const auto& id : ids_) {
        if (!seen.insert(id).second) {
            throw Error(ErrorKind::kData, "DuplicateId", "duplicate embedding id " + id);
        }
    }
}

EmbeddingSet::EmbeddingSet(std::vector<std::string> ids, const std::vector<std::vector<double>>& rows)
    : EmbeddingSet(std::move(ids), [&rows] {
          const std::size_t dim = rows.empty() ? 0 : rows.front().size();
          Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
          for (std::size_t i = 0; i < rows.size(); ++i) {
              if (rows[i].size() != dim) {
                  throw DimensionMismatch("row " + std::to_string(i) + " has dimension " +
                                          std::to_string(rows[i].size()) + ", expected " +
                                          std::to_string(dim));
              }
              for (std::size_t j = 0; j < dim; ++j) {
                  m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
              }
          }
          return m;
      }()) {}

// ---------------------------------------------------------------------------
// Projection
// ---------------------------------------------------------------------------

Projector Projector::fit(const Eigen::MatrixXd& data, Projection method) {
    Projector p;
    p.method_ = method;
    p.dim_ = static_cast<std::size_t>(data.cols());
    if (method == Projection::kPassthrough) {
        if (data.cols() != 2) {
            throw DimensionMismatch("passthrough projection needs 2-D input, got " +
                                    std::to_string(data.cols()));
        }
        return p;
    }
    if (data.rows() < 2) throw DimensionMismatch("PCA needs at least two points");

    p.mean_ = data.colwise().mean();
    Eigen::MatrixXd centred = data.rowwise() - p.mean_;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double tol = sv.size() > 0 ? std::max(sv(0), 1.0) * 1e-10 : 0.0;

    p.rank_ = 0;
    for (Eigen::Index i = 0; i < sv.size() && p.rank_ < 2; ++i) {
        if (sv(i) > tol) ++p.rank_;
    }
    p.axes_ = Eigen::MatrixXd::Zero(data.cols(), 2);
    for (std::size_t c = 0; c < p.rank_; ++c) {
        Eigen::VectorXd axis = svd.matrixV().col(static_cast<Eigen::Index>(c));
        for (Eigen::Index j = 0; j < axis.size(); ++j) {
            if (std::abs(axis(j)) > 1e-12) {
                if (axis(j) < 0) axis = -axis;
                break;
            }
        }
        p.axes_.col(static_cast<Eigen::Index>(c)) = axis;
    }
    if (p.rank_ < 2) {
        p.warning_ = "DegenerateData: covariance rank " + std::to_string(p.rank_) +
                     " < 2, missing axes padded with zeros";
    }
    return p;
}

std::vector<Point2> Projector::transform(const Eigen::MatrixXd& data) const {
    if (static_cast<std::size_t>(data.cols()) != dim_) {
        throw DimensionMismatch("expected dimension " + std::to_string(dim_) + ", got " +
                                std::to_string(data.cols()));
    }
    std::vector<Point2> out(static_cast<std::size_t>(data.rows()));
    if (method_ == Projection::kPassthrough) {
        for (Eigen::Index i = 0; i < data.rows(); ++i) {
            out[static_cast<std::size_t>(i)] = {data(i, 0), data(i, 1)};
        }
        return out;
    }
    Eigen::MatrixXd proj = (data.rowwise() - mean_) * axes_;
    for (Eigen::Index i = 0; i < proj.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = {proj(i, 0), proj(i, 1)};
    }
    return out;
}

Projected project_2d(const EmbeddingSet& emb, Projection method) {
    Projector p = Projector::fit(emb.vectors(), method);
    return {p.transform(emb.vectors()), p.warning()};
}

// ---------------------------------------------------------------------------
// Density and divergence
// ---------------------------------------------------------------------------

Bounds union_bounds(std::span<const Point2> a, std::span<const Point2> b, double margin) {
    if (a.empty() && b.empty()) throw EmptyPoints();
    Bounds out{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
               std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (auto set : {a, b}) {
        for (const auto& p : set) {
            out.xmin = std::min(out.xmin, p.x);
            out.xmax = std::max(out.xmax, p.x);
            out.ymin = std::min(out.ymin, p.y);
            out.ymax = std::max(out.ymax, p.y);
        }
    }
    auto widen = [margin](double& lo, double& hi) {
        double w = hi - lo;
        if (!(w > 0.0)) {
            lo -= 0.5;
            hi += 0.5;
            w = 1.0;
        }
        lo -= margin * w;
        hi += margin * w;
    };
    widen(out.xmin, out.xmax);
    widen(out.ymin, out.ymax);
    return out;
}

Density2D estimate_density(std::span<const Point2> points, std::size_t grid_size,
                           std::optional<Bounds> bounds, double epsilon) {
    if (points.empty()) throw EmptyPoints();
    if (grid_size < 2) throw InvalidArgument("grid size must be at least 2");
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");

    Density2D d;
    d.nx = d.ny = grid_size;
    d.bounds = bounds ? *bounds : union_bounds(points, {});
    d.cells.assign(grid_size * grid_size, 0.0);

    const double g = static_cast<double>(grid_size);
    auto bin = [g, grid_size](double v, double lo, double hi) {
        double t = std::floor((v - lo) / (hi - lo) * g);
        if (!(t >= 0.0)) return std::size_t{0};
        return std::min(static_cast<std::size_t>(t), grid_size - 1);
    };
    const double weight = 1.0 / static_cast<double>(points.size());
    for (const auto& p : points) {
        std::size_t ix = bin(p.x, d.bounds.xmin, d.bounds.xmax);
        std::size_t iy = bin(p.y, d.bounds.ymin, d.bounds.ymax);
        d.cells[iy * grid_size + ix] += weight;
    }
    const double norm = 1.0 + epsilon * static_cast<double>(d.cells.size());
    for (double& c : d.cells) c = (c + epsilon) / norm;
    return d;
}

Density2D uniform_density(std::size_t grid_size, const Bounds& bounds) {
    Density2D d;
    d.nx = d.ny = grid_size;
    d.bounds = bounds;
    d.cells.assign(grid_size * grid_size, 1.0 / static_cast<double>(grid_size * grid_size));
    return d;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw GridMismatch();
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) sum += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(sum, 0.0);
}

double kl_divergence(const Density2D& p, const Density2D& q) {
    if (p.nx != q.nx || p.ny != q.ny || !(p.bounds == q.bounds)) throw GridMismatch();
    return kl_divergence(std::span<const double>(p.cells), std::span<const double>(q.cells));
}

double batch_delta(std::span<const Point2> real_pts, std::span<const Point2> gen_pts,
                   const SelectionConfig& cfg) {
    if (real_pts.empty() || gen_pts.empty()) throw EmptyPoints();
    Bounds shared = union_bounds(real_pts, gen_pts, cfg.margin);
    Density2D real = estimate_density(real_pts, cfg.grid_size, shared, cfg.epsilon);
    Density2D gen = estimate_density(gen_pts, cfg.grid_size, shared, cfg.epsilon);
    if (cfg.mode == DeltaMode::kDirect) return kl_divergence(real, gen);
    Density2D uniform = uniform_density(cfg.grid_size, shared);
    return std::abs(kl_divergence(real, uniform) - kl_divergence(gen, uniform));
}

void SelectionConfig::validate() const {
    if (!(tau >= 0.0)) throw InvalidArgument("tau must be >= 0");
    if (k == 0 || k > n) throw InvalidArgument("batch size k must satisfy 0 < k <= n");
    if (grid_size < 2) throw InvalidArgument("grid size must be at least 2");
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    if (max_attempts == 0) throw InvalidArgument("max_attempts must be positive");
}

// ---------------------------------------------------------------------------
// Streams, providers, selection loop
// ---------------------------------------------------------------------------

ShuffledPoolStream::ShuffledPoolStream(std::vector<CorpusRecord> pool, std::size_t k,
                                       std::uint64_t seed)
    : pool_(std::move(pool)), k_(k) {
    if (k_ == 0) throw InvalidArgument("batch size must be positive");
    std::mt19937_64 rng(seed);
    std::shuffle(pool_.begin(), pool_.end(), rng);
}

std::optional<CandidateBatch> ShuffledPoolStream::next() {
    if (cursor_ + k_ > pool_.size()) return std::nullopt;
    CandidateBatch batch;
    batch.id = batch_id_++;
    batch.records.assign(pool_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                         pool_.begin() + static_cast<std::ptrdiff_t>(cursor_ + k_));
    cursor_ += k_;
    return batch;
}

std::optional<CandidateBatch> VectorStream::next() {
    if (cursor_ >= batches_.size()) return std::nullopt;
    return batches_[cursor_++];
}

LookupEmbeddingProvider::LookupEmbeddingProvider(const EmbeddingSet& table) : table_(table) {
    for (std::size_t i = 0; i < table_.ids().size(); ++i) {
        row_of_.emplace(table_.ids()[i], static_cast<Eigen::Index>(i));
    }
}

Eigen::MatrixXd LookupEmbeddingProvider::embed(std::span<const CorpusRecord> records) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(records.size()),
                        static_cast<Eigen::Index>(table_.dim()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto it = row_of_.find(records[i].id);
        if (it == row_of_.end()) throw MissingField(records[i].id, "embedding");
        out.row(static_cast<Eigen::Index>(i)) = table_.vectors().row(it->second);
    }
    return out;
}

SelectionResult run_selection(CandidateStream& candidates, const EmbeddingSet& real_emb,
                              EmbeddingProvider& embedder, const SelectionConfig& cfg) {
    cfg.validate();
    if (real_emb.size() == 0) throw EmptyPoints();

    Projector projector = Projector::fit(real_emb.vectors(), cfg.projection);
    const std::vector<Point2> real_pts = projector.transform(real_emb.vectors());

    SelectionResult result;
    result.warning = projector.warning();
    std::size_t accepted_records = 0;
    while (result.accepted.size() * cfg.k < cfg.n) {
        if (result.deltas.size() >= cfg.max_attempts) throw Exhausted(result.deltas.size());
        std::optional<CandidateBatch> batch = candidates.next();
        if (!batch) throw Exhausted(result.deltas.size());
        if (batch->records.empty()) continue;

        std::vector<Point2> gen_pts = projector.transform(embedder.embed(batch->records));
        double delta = batch_delta(real_pts, gen_pts, cfg);
        bool keep = cfg.rule == AcceptRule::kDeltaAtLeastTau ? delta >= cfg.tau : delta < cfg.tau;

        result.deltas.push_back({batch->id, delta, keep});
        if (keep) {
            result.accepted.push_back(batch->id);
            accepted_records += batch->records.size();
            for (auto& r : batch->records) result.selected.push_back(std::move(r));
        } else {
            ++result.rejected_count;
        }
    }
    return result;
}

}  // namespace actionkit
