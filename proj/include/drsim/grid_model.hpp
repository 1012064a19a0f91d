#pragma once

// Feeder, tariff and DRE target.
//
// Vectors are indexed by customer node 1..N (stored 0-based); the substation
// carries no load and is not represented. Power is in kW, prices in $/kWh.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "drsim/errors.hpp"
#include "drsim/vector_ops.hpp"

namespace drsim {

class FeederModel {
public:
    FeederModel(Vector s, Vector d_hat, Vector delta, Vector r, std::vector<std::string> ids = {})
        : s_(std::move(s)),
          d_hat_(std::move(d_hat)),
          delta_(std::move(delta)),
          r_(std::move(r)),
          ids_(std::move(ids)) {
        validate();
    }

    std::size_t size() const noexcept { return d_hat_.size(); }

    const Vector& s() const noexcept { return s_; }
    const Vector& d_hat() const noexcept { return d_hat_; }
    const Vector& delta() const noexcept { return delta_; }
    const Vector& r() const noexcept { return r_; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }

    /// d_pre = d_hat + delta - r.
    Vector d_pre() const {
        Vector out(size());
        for (std::size_t n = 0; n < size(); ++n) out[n] = d_hat_[n] + delta_[n] - r_[n];
        return out;
    }

    /// Same feeder with a new inflexible baseline (time-varying loads).
    FeederModel with_d_hat(Vector d_hat) const {
        return FeederModel(s_, std::move(d_hat), delta_, r_, ids_);
    }

private:
    void validate() {
        const std::size_t n = d_hat_.size();
        if (n == 0) throw ValidationError("feeder: at least one load node is required");
        require_same_length(n, s_.size(), "feeder s");
        require_same_length(n, delta_.size(), "feeder delta");
        require_same_length(n, r_.size(), "feeder r");
        if (ids_.empty()) {
            ids_.reserve(n);
            for (std::size_t i = 0; i < n; ++i) ids_.push_back(std::to_string(i + 1));
        }
        require_same_length(n, ids_.size(), "feeder ids");
        for (const Vector* v : {&s_, &d_hat_, &delta_, &r_}) {
            if (!all_finite(*v)) throw ValidationError("feeder: non-finite entry");
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (delta_[i] < 0.0) {
                throw ValidationError("feeder: negative flexible capacity at node " + ids_[i]);
            }
        }
    }

    Vector s_;
    Vector d_hat_;
    Vector delta_;
    Vector r_;
    std::vector<std::string> ids_;
};

struct TariffParams {
    double pi = 2.0;     ///< retail rate
    double pi0 = 1.0;    ///< utility energy cost
    double omega = 0.0;  ///< fixed surcharge per node
    double x_min = 0.0;
    double x_max = 1.0;

    void validate() const {
        if (!(std::isfinite(pi) && std::isfinite(pi0) && std::isfinite(omega) && std::isfinite(x_min) &&
              std::isfinite(x_max))) {
            throw ValidationError("tariff: non-finite parameter");
        }
        if (pi <= 0.0) throw ValidationError("tariff: retail rate pi must be positive");
        if (x_min > x_max) throw ValidationError("tariff: x_min > x_max leaves an empty price box");
    }
};

struct DreTarget {
    double p_ref = 0.0;
    std::size_t window_start = 0;  ///< first DRE step
    std::size_t window_end = 0;    ///< one past the last DRE step

    /// s.d_pre - p_ref, recomputed from whatever baseline the feeder carries.
    double p0_tilde(const FeederModel& feeder) const { return dot(feeder.s(), feeder.d_pre()) - p_ref; }

    std::size_t window_length() const noexcept { return window_end - window_start; }
};

/// s.(d_hat_now + w - r).
inline double aggregate_power(const FeederModel& feeder, ConstSpan d_hat_now, ConstSpan w) {
    const std::size_t n = feeder.size();
    require_same_length(n, d_hat_now.size(), "aggregate_power d_hat");
    require_same_length(n, w.size(), "aggregate_power w");
    double p0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) p0 += feeder.s()[i] * (d_hat_now[i] + w[i] - feeder.r()[i]);
    return p0;
}

inline double regulation_error(double p0_value, const DreTarget& target) { return p0_value - target.p_ref; }

namespace detail {

inline double number_field(const nlohmann::json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(where + ": missing '" + key + "'");
    if (!it->is_number()) throw SchemaError(where + ": '" + key + "' must be a number");
    return it->get<double>();
}

inline Vector number_array(const nlohmann::json& arr, const std::string& where) {
    if (!arr.is_array()) throw SchemaError(where + " must be an array");
    Vector out;
    out.reserve(arr.size());
    for (const auto& v : arr) {
        if (!v.is_number()) throw SchemaError(where + " must contain only numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace detail

/// Parses a feeder document.
///
/// Two layouts are accepted. Record form:
///   {"power_base_kw": 100, "s_all_ones": true,
///    "nodes": [{"id": "701", "d_hat": 630, "delta": 10, "r": 0, "s": 1}, ...]}
/// Column form:
///   {"d_hat": [...], "delta": [...], "r": [...], "s": [...]}
/// Missing r defaults to zero and missing s to the all-ones (meter aggregation)
/// vector. Power values are divided by power_base_kw (default 1).
inline FeederModel load_feeder(const nlohmann::json& doc) {
    if (!doc.is_object()) throw SchemaError("feeder document must be an object");
    double base = 1.0;
    if (doc.contains("power_base_kw")) {
        base = detail::number_field(doc, "power_base_kw", "feeder");
        if (!(base > 0.0) || !std::isfinite(base)) throw ValidationError("feeder: power_base_kw must be positive");
    }
    const bool force_ones = doc.value("s_all_ones", false);

    Vector s, d_hat, delta, r;
    std::vector<std::string> ids;
    if (doc.contains("nodes")) {
        const auto& nodes = doc.at("nodes");
        if (!nodes.is_array()) throw SchemaError("feeder: 'nodes' must be an array");
        std::size_t with_s = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto& node = nodes[i];
            const std::string where = "feeder node " + std::to_string(i);
            if (!node.is_object()) throw SchemaError(where + " must be an object");
            if (node.contains("id")) {
                const auto& id = node.at("id");
                ids.push_back(id.is_string() ? id.get<std::string>() : id.dump());
            } else {
                ids.push_back(std::to_string(i + 1));
            }
            d_hat.push_back(detail::number_field(node, "d_hat", where));
            delta.push_back(detail::number_field(node, "delta", where));
            r.push_back(node.contains("r") ? detail::number_field(node, "r", where) : 0.0);
            if (node.contains("s")) {
                s.push_back(detail::number_field(node, "s", where));
                ++with_s;
            }
        }
        if (with_s != 0 && with_s != nodes.size()) {
            throw SchemaError("feeder: 's' must be given for every node or for none");
        }
    } else {
        if (!doc.contains("d_hat") || !doc.contains("delta")) {
            throw SchemaError("feeder: expected 'nodes' records or 'd_hat'/'delta' columns");
        }
        d_hat = detail::number_array(doc.at("d_hat"), "feeder d_hat");
        delta = detail::number_array(doc.at("delta"), "feeder delta");
        r = doc.contains("r") ? detail::number_array(doc.at("r"), "feeder r") : Vector(d_hat.size(), 0.0);
        if (doc.contains("s")) s = detail::number_array(doc.at("s"), "feeder s");
        if (doc.contains("ids")) {
            for (const auto& id : doc.at("ids")) ids.push_back(id.is_string() ? id.get<std::string>() : id.dump());
        }
    }
    if (force_ones || s.empty()) s.assign(d_hat.size(), 1.0);
    for (Vector* v : {&d_hat, &delta, &r}) {
        for (double& x : *v) x /= base;
    }
    return FeederModel(std::move(s), std::move(d_hat), std::move(delta), std::move(r), std::move(ids));
}

}  // namespace drsim
