#include "cott/bench.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cott {

std::string to_string(BenchImpl impl) {
    switch (impl) {
        case BenchImpl::Softmax: return "softmax";
        case BenchImpl::CosineBidir: return "cosine-bidir";
        case BenchImpl::CosineCausal: return "cosine-causal";
        case BenchImpl::CosineStream: return "cosine-stream";
    }
    throw DomainError("to_string: unknown implementation tag");
}

std::string to_string(BenchAxis axis) { return axis == BenchAxis::Seq ? "seq" : "dim"; }

BenchImpl parse_impl(const std::string& name) {
    if (name == "softmax") return BenchImpl::Softmax;
    if (name == "cosine-bidir") return BenchImpl::CosineBidir;
    if (name == "cosine-causal") return BenchImpl::CosineCausal;
    if (name == "cosine-stream") return BenchImpl::CosineStream;
    throw DomainError("unknown implementation '" + name + "'");
}

BenchAxis parse_axis(const std::string& name) {
    if (name == "seq") return BenchAxis::Seq;
    if (name == "dim") return BenchAxis::Dim;
    throw DomainError("unknown axis '" + name + "'");
}

ScalingFit fit_exponent(const std::vector<BenchRecord>& records, FitMetric metric) {
    std::vector<double> xs, ys;
    for (const BenchRecord& rec : records) {
        if (!rec.ok) continue;
        const Index size = rec.axis == BenchAxis::Seq ? rec.s : rec.d;
        const double y = metric == FitMetric::Time ? static_cast<double>(rec.wall_ns)
                                                   : static_cast<double>(rec.peak_bytes);
        if (size < 1 || y <= 0.0) continue;
        xs.push_back(std::log(static_cast<double>(size)));
        ys.push_back(std::log(y));
    }
    if (xs.size() < 4) throw DomainError("fit_exponent: need at least 4 valid points");
    const auto [min_x, max_x] = std::minmax_element(xs.begin(), xs.end());
    if (*max_x - *min_x < std::log(8.0) - 1e-12)
        throw DomainError("fit_exponent: points must span at least an 8x range");

    const double n = static_cast<double>(xs.size());
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mean_x += xs[i];
        mean_y += ys[i];
    }
    mean_x /= n;
    mean_y /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mean_x) * (xs[i] - mean_x);
        sxy += (xs[i] - mean_x) * (ys[i] - mean_y);
        syy += (ys[i] - mean_y) * (ys[i] - mean_y);
    }
    ScalingFit fit;
    fit.points = static_cast<int>(xs.size());
    fit.exponent = sxy / sxx;
    if (syy <= 1e-30) {
        fit.r2 = 1.0;  // perfectly flat data is fit exactly by slope 0
    } else {
        double ss_res = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double pred = mean_y + fit.exponent * (xs[i] - mean_x);
            ss_res += (ys[i] - pred) * (ys[i] - pred);
        }
        fit.r2 = 1.0 - ss_res / syy;
    }
    return fit;
}

void emit_csv(const std::vector<BenchRecord>& records,
              const std::vector<std::pair<std::string, ScalingFit>>& fits, const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary keeps LF endings everywhere
    if (!out) throw UsageError("emit_csv: cannot open '" + path + "' for writing");
    out << "impl,axis,s,d,reps,wall_ns_median,peak_bytes,status\n";
    for (const BenchRecord& rec : records) {
        out << to_string(rec.impl) << ',' << to_string(rec.axis) << ',' << rec.s << ',' << rec.d << ','
            << rec.reps << ',' << rec.wall_ns << ',' << rec.peak_bytes << ','
            << (rec.ok ? "ok" : "failed") << '\n';
    }
    for (const auto& [label, fit] : fits) {
        char line[160];
        std::snprintf(line, sizeof(line), "# fit %s exponent=%.6f r2=%.6f points=%d", label.c_str(),
                      fit.exponent, fit.r2, fit.points);
        out << line << '\n';
    }
    if (!out) throw UsageError("emit_csv: write to '" + path + "' failed");
}

std::vector<BenchRecord> parse_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("parse_csv: cannot open '" + path + "'");
    std::vector<BenchRecord> records;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;  // schema row
            continue;
        }
        std::stringstream ss(line);
        std::string impl, axis, s, d, reps, wall, peak, status;
        if (!(std::getline(ss, impl, ',') && std::getline(ss, axis, ',') && std::getline(ss, s, ',') &&
              std::getline(ss, d, ',') && std::getline(ss, reps, ',') && std::getline(ss, wall, ',') &&
              std::getline(ss, peak, ',') && std::getline(ss, status)))
            throw UsageError("parse_csv: malformed row '" + line + "'");
        BenchRecord rec;
        rec.impl = parse_impl(impl);
        rec.axis = parse_axis(axis);
        rec.s = static_cast<Index>(std::stoll(s));
        rec.d = static_cast<Index>(std::stoll(d));
        rec.reps = std::stoi(reps);
        rec.wall_ns = static_cast<std::uint64_t>(std::stoull(wall));
        rec.peak_bytes = static_cast<std::uint64_t>(std::stoull(peak));
        rec.ok = status == "ok";
        records.push_back(rec);
    }
    return records;
}

}  // namespace cott
