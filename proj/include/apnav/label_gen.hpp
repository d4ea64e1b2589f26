#pragma once

// Ground-truth navigation labels: every grid pose is mapped to the nearest
// grid pose whose confidence reaches p_thres, and the signed (dtheta, dr)
// offset to it becomes the regression target.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "apnav/detector_field.hpp"
#include "apnav/geometry.hpp"
#include "apnav/json_io.hpp"
#include "apnav/rng.hpp"

namespace apnav {

struct NavigationLabel {
    double dtheta = 0.0; ///< signed radians, positive = rotate right
    double dr = 0.0;     ///< signed meters
    bool reachable = true;

    friend bool operator==(const NavigationLabel&, const NavigationLabel&) = default;
};

struct NearestResult {
    GridIndex target;
    bool reachable = false;
};

namespace detail {

/// Offset of one grid point relative to a source: signed angle steps in
/// (-n/2, n/2] and signed radius steps.
struct Offset {
    long dk = 0;
    long dj = 0;
    double dist = 0.0;
};

inline long signed_angle_steps(std::size_t from, std::size_t to, std::size_t n) noexcept
{
    const long nl = static_cast<long>(n);
    long dk = (static_cast<long>(to) - static_cast<long>(from)) % nl;
    if (dk < 0)
        dk += nl;
    if (2 * dk > nl)
        dk -= nl;
    return dk;
}

inline double offset_distance(const PoseGrid& grid, double r_source, long dk, long dj,
                              double radial_weight) noexcept
{
    const double arc = static_cast<double>(std::labs(dk)) * grid.angle_step() * r_source;
    const double rad = radial_weight * static_cast<double>(std::labs(dj)) * grid.radius_step();
    return std::sqrt(arc * arc + rad * rad);
}

inline int sign_rank(long v) noexcept { return v > 0 ? 0 : (v == 0 ? 1 : 2); }

/// Strict "a is nearer than b" with the tie-break chain: distance (relative
/// tolerance 1e-9), positive dtheta before zero before negative, smaller
/// |dr|, positive dr.
inline bool nearer(const Offset& a, const Offset& b) noexcept
{
    const double tol = 1e-9 * std::max({1.0, a.dist, b.dist});
    if (a.dist < b.dist - tol)
        return true;
    if (b.dist < a.dist - tol)
        return false;
    if (sign_rank(a.dk) != sign_rank(b.dk))
        return sign_rank(a.dk) < sign_rank(b.dk);
    if (std::labs(a.dj) != std::labs(b.dj))
        return std::labs(a.dj) < std::labs(b.dj);
    if (sign_rank(a.dj) != sign_rank(b.dj))
        return sign_rank(a.dj) < sign_rank(b.dj);
    return std::labs(a.dk) < std::labs(b.dk);
}

} // namespace detail

/// Precomputed threshold mask with per-row circular distances to the nearest
/// qualifying angle, so each query only visits radius rows in order of
/// radial offset and stops once radial travel alone exceeds the best distance.
class ThresholdIndex {
public:
    ThresholdIndex(const ManifoldTable& table, double p_thres)
        : grid_(table.grid), p_thres_(p_thres)
    {
        if (!(p_thres > 0.0 && p_thres < 1.0))
            throw std::invalid_argument("p_thres must lie in (0, 1)");
        const std::size_t na = grid_.n_angles();
        const std::size_t nr = grid_.n_radii();
        const std::size_t none = std::numeric_limits<std::size_t>::max();
        forward_.assign(grid_.size(), none);
        backward_.assign(grid_.size(), none);
        std::size_t best_flat = 0;
        for (std::size_t k = 0; k < table.values.size(); ++k)
            if (table.values[k] > table.values[best_flat])
                best_flat = k;
        argmax_ = grid_.unflat(best_flat);

        for (std::size_t j = 0; j < nr; ++j) {
            auto ok = [&](std::size_t i) { return table.at(i, j) >= p_thres; };
            // forward: smallest k >= 0 with (i + k) qualifying. Two laps cover wrap-around.
            std::size_t run = none;
            for (std::size_t step = 0; step < 2 * na; ++step) {
                const std::size_t i = (2 * na - 1 - step) % na;
                run = ok(i) ? 0 : (run == none ? none : run + 1);
                if (step >= na)
                    forward_[grid_.flat({i, j})] = run;
            }
            // backward: smallest k >= 1 with (i - k) qualifying.
            run = none;
            for (std::size_t step = 0; step < 2 * na; ++step) {
                const std::size_t i = step % na;
                if (step >= na)
                    backward_[grid_.flat({i, j})] = run == none ? none : run + 1;
                run = ok(i) ? 0 : (run == none ? none : run + 1);
            }
            for (std::size_t i = 0; i < na; ++i)
                any_ = any_ || ok(i);
        }
    }

    bool any_qualifying() const noexcept { return any_; }
    GridIndex argmax() const noexcept { return argmax_; }

    NearestResult nearest(GridIndex source, double radial_weight) const
    {
        if (source.angle >= grid_.n_angles() || source.radius >= grid_.n_radii())
            throw IndexError("source index outside grid");
        if (!any_)
            return {argmax_, false};
        const std::size_t none = std::numeric_limits<std::size_t>::max();
        const long na = static_cast<long>(grid_.n_angles());
        const long nr = static_cast<long>(grid_.n_radii());
        const long sj = static_cast<long>(source.radius);
        const double r_source = grid_.radius_of(source.radius);

        bool found = false;
        detail::Offset best;
        // Radius rows in order |dj| = 0, 1, 2, ...; both signs per magnitude.
        for (long mag = 0; mag < nr; ++mag) {
            const double radial = radial_weight * static_cast<double>(mag) * grid_.radius_step();
            if (found && radial > best.dist + 1e-9 * std::max(1.0, best.dist))
                break;
            for (long dj : {mag, -mag}) {
                if (mag == 0 && dj < 0)
                    continue;
                const long j = sj + dj;
                if (j < 0 || j >= nr)
                    continue;
                const std::size_t k = grid_.flat({source.angle, static_cast<std::size_t>(j)});
                const std::size_t fw = forward_[k];
                const std::size_t bw = backward_[k];
                if (fw != none && 2 * static_cast<long>(fw) <= na)
                    consider({static_cast<long>(fw), dj, 0.0}, r_source, radial_weight, found, best);
                if (bw != none && 2 * static_cast<long>(bw) < na)
                    consider({-static_cast<long>(bw), dj, 0.0}, r_source, radial_weight, found, best);
            }
        }
        const long ti = ((static_cast<long>(source.angle) + best.dk) % na + na) % na;
        return {{static_cast<std::size_t>(ti), static_cast<std::size_t>(sj + best.dj)}, true};
    }

private:
    void consider(detail::Offset cand, double r_source, double radial_weight, bool& found,
                  detail::Offset& best) const
    {
        cand.dist = detail::offset_distance(grid_, r_source, cand.dk, cand.dj, radial_weight);
        if (!found || detail::nearer(cand, best)) {
            best = cand;
            found = true;
        }
    }

    PoseGrid grid_;
    double p_thres_;
    std::vector<std::size_t> forward_;
    std::vector<std::size_t> backward_;
    GridIndex argmax_;
    bool any_ = false;
};

/// Nearest grid point with confidence >= p_thres, measured as arc length at
/// the source radius combined with weighted radial travel. Falls back to the
/// global argmax (first in angle-major order) with reachable = false.
inline NearestResult nearest_above(const ConfidenceField& field, const PoseGrid& grid, GridIndex source,
                                   double p_thres, double radial_weight = 1.0)
{
    return ThresholdIndex(export_manifold(field, grid), p_thres).nearest(source, radial_weight);
}

/// Signed offset from source to target. dtheta uses the grid's wrapped step
/// count, so a target exactly opposite is reported as +pi.
inline NavigationLabel label_from_target(const PoseGrid& grid, GridIndex source, GridIndex target,
                                         bool reachable)
{
    const Pose s = pose_at(grid, source);
    const Pose t = pose_at(grid, target);
    const long dk = detail::signed_angle_steps(source.angle, target.angle, grid.n_angles());
    return {static_cast<double>(dk) * grid.angle_step(), t.r - s.r, reachable};
}

/// Signed offset between two arbitrary poses.
inline NavigationLabel label_between(Pose source, Pose target, bool reachable = true)
{
    return {signed_angle_diff(source.theta, target.theta), target.r - source.r, reachable};
}

struct NormalizedLabel {
    double u = 0.5; ///< rotation in [0, 1]
    double v = 0.5; ///< translation in [0, 1]

    friend bool operator==(const NormalizedLabel&, const NormalizedLabel&) = default;
};

inline NormalizedLabel normalize(double dtheta, double dr, const PoseGrid& grid) noexcept
{
    const double range = grid.radial_range();
    const double v = range > 0.0 ? (dr + range) / (2.0 * range) : 0.5;
    return {(dtheta + std::numbers::pi) / kTwoPi, v};
}

inline NormalizedLabel normalize(const NavigationLabel& label, const PoseGrid& grid) noexcept
{
    return normalize(label.dtheta, label.dr, grid);
}

inline Proposal denormalize(NormalizedLabel n, const PoseGrid& grid) noexcept
{
    const double range = grid.radial_range();
    return {n.u * kTwoPi - std::numbers::pi, range > 0.0 ? n.v * 2.0 * range - range : 0.0};
}

struct DatasetRecord {
    GridIndex index;
    Pose pose;
    Observation observation;
    double p = 0.0;
    NavigationLabel label;
    NormalizedLabel label_norm;
};

struct Dataset {
    WorldConfig world;
    ConfidenceField field;
    double p_thres = 0.9;
    double radial_weight = 1.0;
    std::uint64_t noise_seed = 0;
    Provenance provenance;
    std::vector<DatasetRecord> records;
};

/// Seed of the observation noise stream for one grid point.
inline std::uint64_t record_noise_seed(std::uint64_t noise_seed, std::size_t flat_index) noexcept
{
    return derive_seed(noise_seed, static_cast<std::uint64_t>(flat_index));
}

inline Dataset generate_dataset(const World& world, const ConfidenceField& field, double p_thres,
                                double radial_weight, std::uint64_t noise_seed)
{
    validate(field);
    if (!(radial_weight > 0.0))
        throw std::invalid_argument("radial_weight must be positive");
    const PoseGrid& grid = world.grid();
    const ManifoldTable table = export_manifold(field, grid);
    const ThresholdIndex index(table, p_thres);

    Dataset ds{world.config(), field, p_thres, radial_weight, noise_seed, {}, {}};
    ds.records.reserve(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const GridIndex src = grid.unflat(k);
        const NearestResult hit = index.nearest(src, radial_weight);
        DatasetRecord rec;
        rec.index = src;
        rec.pose = pose_at(grid, src);
        rec.observation = world.observe(rec.pose, record_noise_seed(noise_seed, k));
        rec.p = table.values[k];
        rec.label = label_from_target(grid, src, hit.target, hit.reachable);
        rec.label_norm = normalize(rec.label, grid);
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

// JSON Lines format: a header object, then one object per record.

inline json dataset_header(const Dataset& ds)
{
    const auto& g = ds.world.grid;
    json h;
    stamp(h, ds.provenance);
    h["kind"] = "dataset";
    h["n_angles"] = g.n_angles();
    h["n_radii"] = g.n_radii();
    h["r_min"] = g.r_min();
    h["r_max"] = g.r_max();
    h["p_thres"] = ds.p_thres;
    h["radial_weight"] = ds.radial_weight;
    h["obs_dim"] = ds.world.obs_dim;
    h["obs_noise_sigma"] = ds.world.obs_noise_sigma;
    h["encoder_scale"] = ds.world.encoder_scale;
    h["seeds"] = {{"encoder", ds.world.encoder_seed}, {"noise", ds.noise_seed}};
    h["field_params"] = field_to_json(ds.field);
    h["n_records"] = ds.records.size();
    return h;
}

inline json record_to_json(const DatasetRecord& r)
{
    json obs = json::array();
    for (double x : r.observation)
        obs.push_back(round9(x));
    return {{"ai", r.index.angle},
            {"ri", r.index.radius},
            {"theta", round9(r.pose.theta)},
            {"r", round9(r.pose.r)},
            {"p", round9(r.p)},
            {"dtheta", round9(r.label.dtheta)},
            {"dr", round9(r.label.dr)},
            {"reachable", r.label.reachable},
            {"label_norm", {round9(r.label_norm.u), round9(r.label_norm.v)}},
            {"obs", std::move(obs)}};
}

inline void write_dataset(std::ostream& os, const Dataset& ds)
{
    os << dataset_header(ds).dump() << '\n';
    for (const auto& r : ds.records)
        os << record_to_json(r).dump() << '\n';
}

inline void write_dataset(const Dataset& ds, const std::string& path)
{
    std::ostringstream ss;
    write_dataset(ss, ds);
    write_file(path, ss.str());
}

inline Dataset read_dataset(std::istream& is)
{
    Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    auto parse_line = [&](const std::string& text) {
        try {
            return json::parse(text);
        } catch (const json::parse_error& e) {
            throw SchemaError(std::string("malformed JSON: ") + e.what(), line_no);
        }
    };

    if (!std::getline(is, line))
        throw SchemaError("empty dataset file: missing header", 1);
    ++line_no;
    const json h = parse_line(line);
    check_schema_version(h, line_no);
    if (require_as<std::string>(h, "kind", line_no) != "dataset")
        throw SchemaError("not a dataset file", line_no);
    try {
        ds.world.grid = make_grid(require_as<std::size_t>(h, "n_angles", line_no),
                                  require_as<std::size_t>(h, "n_radii", line_no),
                                  require_number(h, "r_min", line_no), require_number(h, "r_max", line_no));
    } catch (const DimensionError& e) {
        throw SchemaError(e.what(), line_no);
    }
    ds.world.obs_dim = require_as<std::size_t>(h, "obs_dim", line_no);
    ds.world.obs_noise_sigma = require_number(h, "obs_noise_sigma", line_no);
    ds.world.encoder_scale = require_number(h, "encoder_scale", line_no);
    const json& seeds = require(h, "seeds", line_no);
    ds.world.encoder_seed = require_as<std::uint64_t>(seeds, "encoder", line_no);
    ds.noise_seed = require_as<std::uint64_t>(seeds, "noise", line_no);
    ds.p_thres = require_number(h, "p_thres", line_no);
    ds.radial_weight = require_number(h, "radial_weight", line_no);
    ds.field = field_from_json(require(h, "field_params", line_no), line_no);
    ds.provenance = read_provenance(h);
    const auto n_records = require_as<std::size_t>(h, "n_records", line_no);
    const PoseGrid& grid = ds.world.grid;

    ds.records.reserve(n_records);
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty())
            continue;
        const json j = parse_line(line);
        DatasetRecord r;
        r.index = {require_as<std::size_t>(j, "ai", line_no), require_as<std::size_t>(j, "ri", line_no)};
        if (r.index.angle >= grid.n_angles() || r.index.radius >= grid.n_radii())
            throw SchemaError("record grid index outside the grid", line_no);
        r.pose = {require_number(j, "theta", line_no), require_number(j, "r", line_no)};
        r.p = require_number(j, "p", line_no);
        r.label = {require_number(j, "dtheta", line_no), require_number(j, "dr", line_no),
                   require_as<bool>(j, "reachable", line_no)};
        const json& ln = require(j, "label_norm", line_no);
        if (!ln.is_array() || ln.size() != 2 || !ln[0].is_number() || !ln[1].is_number())
            throw SchemaError("label_norm must be a pair of numbers", line_no);
        r.label_norm = {ln[0].get<double>(), ln[1].get<double>()};
        const json& obs = require(j, "obs", line_no);
        if (!obs.is_array() || obs.size() != ds.world.obs_dim)
            throw SchemaError("obs must be an array of length obs_dim", line_no);
        r.observation.reserve(obs.size());
        for (const auto& x : obs) {
            if (!x.is_number())
                throw SchemaError("obs entries must be numbers", line_no);
            r.observation.push_back(x.get<double>());
        }
        ds.records.push_back(std::move(r));
    }
    if (ds.records.size() != n_records)
        throw SchemaError("expected " + std::to_string(n_records) + " records, found "
                              + std::to_string(ds.records.size()) + " (file truncated)",
                          line_no + 1);
    return ds;
}

inline Dataset read_dataset(const std::string& path)
{
    std::istringstream ss(read_file(path));
    return read_dataset(ss);
}

} // namespace apnav
