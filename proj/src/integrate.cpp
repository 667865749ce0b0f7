#include "flowcast/integrate.hpp"

#include "flowcast/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace flowcast {

namespace {
void require_n(int n, const char* what) {
    if (n < 1) throw ParamError(std::string(what) + ": N must be >= 1, got " + std::to_string(n));
}
} // namespace

DiScheme DiScheme::lag(int n) {
    require_n(n, "lag");
    return {Kind::Lag, n, 0};
}
DiScheme DiScheme::moving_avg(int n) {
    require_n(n, "moving_avg");
    return {Kind::MovingAvg, n, 0};
}
DiScheme DiScheme::regular_snapshot(int n) {
    require_n(n, "regular_snapshot");
    return {Kind::RegularSnapshot, n, 0};
}
DiScheme DiScheme::regular_avg(int n) {
    require_n(n, "regular_avg");
    return {Kind::RegularAvg, n, 0};
}
DiScheme DiScheme::all_lags(int n) {
    require_n(n, "all_lags");
    return {Kind::AllLags, n, 0};
}
DiScheme DiScheme::cnn_di(int p1, int n) {
    require_n(n, "cnn_di");
    if (p1 < 0 || p1 >= n)
        throw ParamError("cnn_di: need 0 <= p1 < N, got p1=" + std::to_string(p1) +
                         " N=" + std::to_string(n));
    return {Kind::CnnDi, n, p1};
}

int DiScheme::direct_width() const {
    switch (kind) {
    case Kind::Projection: return 0;
    case Kind::Lag:
    case Kind::MovingAvg:
    case Kind::RegularSnapshot:
    case Kind::RegularAvg: return 1;
    case Kind::AllLags: return n;
    case Kind::CnnDi: return p1;
    }
    return 0;
}

int DiScheme::conv_width() const { return kind == Kind::CnnDi ? n - p1 : 0; }

std::string DiScheme::label() const {
    char buf[48];
    switch (kind) {
    case Kind::Projection: return "projection";
    case Kind::Lag: std::snprintf(buf, sizeof buf, "di(%d)", n); break;
    case Kind::MovingAvg: std::snprintf(buf, sizeof buf, "di(%d)-m", n); break;
    case Kind::RegularSnapshot: std::snprintf(buf, sizeof buf, "di(%d)-rs", n); break;
    case Kind::RegularAvg: std::snprintf(buf, sizeof buf, "di(%d)-ra", n); break;
    case Kind::AllLags: std::snprintf(buf, sizeof buf, "di(%d)-a", n); break;
    case Kind::CnnDi: std::snprintf(buf, sizeof buf, "cnn-di(%d,%d)", p1, n); break;
    }
    return buf;
}

DiScheme DiScheme::parse(const std::string& text) {
    std::string s;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) s += std::tolower(static_cast<unsigned char>(c));
    if (s == "projection" || s == "lstm") return projection();

    int n = 0, p1 = 0;
    char suffix[8] = {0};
    if (std::sscanf(s.c_str(), "cnn-di(%d,%d)", &p1, &n) == 2) return cnn_di(p1, n);
    if (std::sscanf(s.c_str(), "di(%d)-%4s", &n, suffix) == 2) {
        std::string suf(suffix);
        if (suf == "m") return moving_avg(n);
        if (suf == "rs") return regular_snapshot(n);
        if (suf == "ra") return regular_avg(n);
        if (suf == "a") return all_lags(n);
        throw ConfigError("unknown DI suffix '" + suf + "' in '" + text + "'");
    }
    if (std::sscanf(s.c_str(), "di(%d)", &n) == 1) return lag(n);
    throw ConfigError("cannot parse DI scheme '" + text + "'");
}

std::pair<std::vector<double>, std::vector<double>> fill_missing(const std::vector<double>& obs) {
    std::vector<double> filled(obs.size()), mask(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (std::isnan(obs[i])) {
            filled[i] = 0.0;
            mask[i] = 0.0;
        } else {
            filled[i] = obs[i];
            mask[i] = 1.0;
        }
    }
    return {std::move(filled), std::move(mask)};
}

namespace {

double mask_at(const std::vector<double>& mask, long i) {
    return mask.empty() ? 1.0 : mask[static_cast<std::size_t>(i)];
}

void check_range(const std::vector<double>& obs, long lo, long hi, long t, const char* what) {
    if (lo < 0 || hi > static_cast<long>(obs.size()) || hi > t)
        throw WindowError(std::string(what) + ": window [" + std::to_string(lo) + "," +
                          std::to_string(hi) + ") invalid at t=" + std::to_string(t));
}

} // namespace

ObservationWindow assemble(const DiScheme& scheme, const std::vector<double>& obs,
                           const std::vector<double>& mask, long t, long cycle_anchor) {
    if (!mask.empty() && mask.size() != obs.size())
        throw ShapeError("assemble: mask length does not match observations");
    if (cycle_anchor > t)
        throw WindowError("assemble: cycle_anchor " + std::to_string(cycle_anchor) +
                          " is after t=" + std::to_string(t));
    if (t > static_cast<long>(obs.size()))
        throw WindowError("assemble: t=" + std::to_string(t) + " beyond series length " +
                          std::to_string(obs.size()));

    ObservationWindow w;
    const long n = scheme.n;

    switch (scheme.kind) {
    case DiScheme::Kind::Projection:
        return w;

    case DiScheme::Kind::Lag: {
        check_range(obs, t - n, t - n + 1, t, "lag");
        w.direct = {obs[t - n]};
        w.direct_valid = {mask_at(mask, t - n)};
        return w;
    }

    case DiScheme::Kind::MovingAvg: {
        check_range(obs, t - n, t, t, "moving_avg");
        double sum = 0.0, valid = 1.0;
        for (long i = t - n; i < t; ++i) {
            sum += obs[i];
            valid = std::min(valid, mask_at(mask, i));
        }
        w.direct = {sum / static_cast<double>(n)};
        w.direct_valid = {valid};
        return w;
    }

    case DiScheme::Kind::AllLags: {
        if (t < n)
            throw WindowError("all_lags: t=" + std::to_string(t) + " < N=" + std::to_string(n));
        check_range(obs, t - n, t, t, "all_lags");
        w.direct.reserve(n);
        for (long i = t - n; i < t; ++i) {
            w.direct.push_back(obs[i]);
            w.direct_valid.push_back(mask_at(mask, i));
        }
        return w;
    }

    case DiScheme::Kind::RegularSnapshot: {
        // Largest s <= t-1 on the cycle grid; that snapshot is held for the
        // remaining N-1 days of its cycle.
        if (t <= cycle_anchor)
            throw WindowError("regular_snapshot: no snapshot available before t=" +
                              std::to_string(t));
        const long s = cycle_anchor + ((t - 1 - cycle_anchor) / n) * n;
        check_range(obs, s, s + 1, t, "regular_snapshot");
        w.direct = {obs[s]};
        w.direct_valid = {mask_at(mask, s)};
        return w;
    }

    case DiScheme::Kind::RegularAvg: {
        // Most recently completed N-day cycle ending at or before t-1.
        if (t < cycle_anchor + n)
            throw WindowError("regular_avg: no completed cycle before t=" + std::to_string(t));
        const long c = cycle_anchor + ((t - n - cycle_anchor) / n) * n;
        check_range(obs, c, c + n, t, "regular_avg");
        double sum = 0.0, valid = 1.0;
        for (long i = c; i < c + n; ++i) {
            sum += obs[i];
            valid = std::min(valid, mask_at(mask, i));
        }
        w.direct = {sum / static_cast<double>(n)};
        w.direct_valid = {valid};
        return w;
    }

    case DiScheme::Kind::CnnDi: {
        if (t < n)
            throw WindowError("cnn_di: t=" + std::to_string(t) + " < N=" + std::to_string(n));
        check_range(obs, t - n, t, t, "cnn_di");
        const long p1 = scheme.p1;
        w.conv.reserve(n - p1);
        for (long i = t - n; i < t - p1; ++i) {
            w.conv.push_back(obs[i]);
            w.conv_valid.push_back(mask_at(mask, i));
        }
        w.direct.reserve(p1);
        for (long i = t - p1; i < t; ++i) {
            w.direct.push_back(obs[i]);
            w.direct_valid.push_back(mask_at(mask, i));
        }
        return w;
    }
    }
    throw ParamError("assemble: unknown scheme kind");
}

} // namespace flowcast
