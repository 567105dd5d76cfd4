#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "cott/bench.hpp"

using cott::BenchAxis;
using cott::BenchImpl;
using cott::BenchRecord;
using cott::Index;

namespace {

std::vector<BenchRecord> synthetic(double coeff, double power, double mem_power) {
    std::vector<BenchRecord> records;
    for (const Index s : {Index(64), Index(128), Index(256), Index(512), Index(1024)}) {
        BenchRecord rec;
        rec.impl = BenchImpl::CosineCausal;
        rec.axis = BenchAxis::Seq;
        rec.s = s;
        rec.d = 64;
        rec.reps = 5;
        rec.wall_ns = static_cast<std::uint64_t>(coeff * std::pow(double(s), power));
        rec.peak_bytes = static_cast<std::uint64_t>(coeff * std::pow(double(s), mem_power));
        records.push_back(rec);
    }
    return records;
}

int count_lines(const std::string& path, bool comments) {
    std::ifstream in(path);
    int n = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && (line[0] == '#') == comments) ++n;
    return n;
}

}  // namespace

TEST_CASE("fit_exponent: recovers exact power laws from synthetic data") {
    const auto lin = synthetic(100.0, 1.0, 2.0);
    const auto fit_t = cott::fit_exponent(lin, cott::FitMetric::Time);
    CHECK(std::abs(fit_t.exponent - 1.0) < 1e-9);
    CHECK(fit_t.r2 > 1.0 - 1e-9);
    CHECK(fit_t.points == 5);
    const auto fit_m = cott::fit_exponent(lin, cott::FitMetric::Memory);
    CHECK(std::abs(fit_m.exponent - 2.0) < 1e-9);

    const auto quad = synthetic(3.0, 2.0, 3.0);
    CHECK(std::abs(cott::fit_exponent(quad, cott::FitMetric::Time).exponent - 2.0) < 1e-9);
    CHECK(std::abs(cott::fit_exponent(quad, cott::FitMetric::Memory).exponent - 3.0) < 1e-9);
}

TEST_CASE("fit_exponent: flat data fits slope zero with r2 = 1") {
    auto records = synthetic(1.0, 0.0, 0.0);
    for (auto& r : records) {
        r.wall_ns = 7777;
        r.peak_bytes = 4096;
    }
    const auto fit = cott::fit_exponent(records, cott::FitMetric::Time);
    CHECK(std::abs(fit.exponent) < 1e-12);
    CHECK(fit.r2 == 1.0);
}

TEST_CASE("fit_exponent: too few valid points or too narrow a span") {
    auto records = synthetic(100.0, 1.0, 1.0);
    records.resize(3);
    CHECK_THROWS_AS(cott::fit_exponent(records, cott::FitMetric::Time), cott::DomainError);

    // 5 rows but 2 failed -> only 3 usable.
    auto partial = synthetic(100.0, 1.0, 1.0);
    partial[1].ok = false;
    partial[3].ok = false;
    CHECK_THROWS_AS(cott::fit_exponent(partial, cott::FitMetric::Time), cott::DomainError);

    std::vector<BenchRecord> narrow;
    for (const Index s : {Index(100), Index(200), Index(400), Index(700)}) {
        BenchRecord rec;
        rec.axis = BenchAxis::Seq;
        rec.s = s;
        rec.d = 64;
        rec.reps = 3;
        rec.wall_ns = static_cast<std::uint64_t>(s);
        rec.peak_bytes = 1;
        narrow.push_back(rec);
    }
    CHECK_THROWS_AS(cott::fit_exponent(narrow, cott::FitMetric::Time), cott::DomainError);
}

TEST_CASE("csv: emit then parse restores every record, including failures") {
    auto records = synthetic(10.0, 1.0, 1.0);
    records[2].ok = false;
    records[4].impl = BenchImpl::Softmax;
    records[0].axis = BenchAxis::Dim;
    const std::string path = "bench_roundtrip_tmp.csv";
    cott::emit_csv(records, {{"time-vs-seq cosine-causal", cott::ScalingFit{1.0, 0.999, 5}}}, path);
    const auto back = cott::parse_csv(path);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) CHECK(back[i] == records[i]);
    std::remove(path.c_str());
}

TEST_CASE("csv: empty sweep writes just the header") {
    const std::string path = "bench_empty_tmp.csv";
    cott::emit_csv({}, {}, path);
    CHECK(count_lines(path, false) == 1);
    CHECK(count_lines(path, true) == 0);
    CHECK(cott::parse_csv(path).empty());
    std::remove(path.c_str());
}

TEST_CASE("csv: rows and fit comments are laid out as documented") {
    const auto records = synthetic(10.0, 1.0, 1.0);
    const std::string path = "bench_layout_tmp.csv";
    cott::emit_csv(records, {{"a", {}}, {"b", {}}}, path);
    CHECK(count_lines(path, false) == 6);  // header + 5 rows
    CHECK(count_lines(path, true) == 2);
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    CHECK(first == "impl,axis,s,d,reps,wall_ns_median,peak_bytes,status");
    std::remove(path.c_str());
}

TEST_CASE("csv: parse failures") {
    CHECK_THROWS_AS(cott::parse_csv("does_not_exist_tmp.csv"), cott::UsageError);
    const std::string path = "bench_malformed_tmp.csv";
    {
        std::ofstream out(path);
        out << "impl,axis,s,d,reps,wall_ns_median,peak_bytes,status\n";
        out << "softmax,seq,128\n";
    }
    CHECK_THROWS_AS(cott::parse_csv(path), cott::UsageError);
    std::remove(path.c_str());
}

TEST_CASE("impl and axis names round-trip; unknown names are rejected") {
    for (const auto impl : {BenchImpl::Softmax, BenchImpl::CosineBidir, BenchImpl::CosineCausal,
                            BenchImpl::CosineStream})
        CHECK(cott::parse_impl(cott::to_string(impl)) == impl);
    for (const auto axis : {BenchAxis::Seq, BenchAxis::Dim})
        CHECK(cott::parse_axis(cott::to_string(axis)) == axis);
    CHECK_THROWS_AS(cott::parse_impl("fft"), cott::DomainError);
    CHECK_THROWS_AS(cott::parse_axis("batch"), cott::DomainError);
}

TEST_CASE("run_sweep: argument validation") {
    cott::BenchOptions opt;
    CHECK_THROWS_AS(cott::run_sweep<double>(BenchImpl::Softmax, BenchAxis::Seq, {}, opt),
                    cott::DomainError);
    CHECK_THROWS_AS(cott::run_sweep<double>(BenchImpl::Softmax, BenchAxis::Seq, {8, 8}, opt),
                    cott::DomainError);
    CHECK_THROWS_AS(cott::run_sweep<double>(BenchImpl::Softmax, BenchAxis::Seq, {16, 8}, opt),
                    cott::DomainError);
    opt.reps = 2;
    CHECK_THROWS_AS(cott::run_sweep<double>(BenchImpl::Softmax, BenchAxis::Seq, {8}, opt),
                    cott::DomainError);
}

TEST_CASE("run_sweep: a small point produces a positive, well-formed record") {
    cott::BenchOptions opt;
    opt.heads = 2;
    opt.fixed_dim = 4;
    opt.reps = 3;
    const auto records = cott::run_sweep<double>(BenchImpl::Softmax, BenchAxis::Seq, {8}, opt);
    REQUIRE(records.size() == 1);
    CHECK(records[0].ok);
    CHECK(records[0].s == 8);
    CHECK(records[0].d == 4);
    CHECK(records[0].reps == 3);
    CHECK(records[0].wall_ns > 0);
    CHECK(records[0].peak_bytes > 0);
}

TEST_CASE("run_sweep: tracked peaks are deterministic across identical sweeps") {
    cott::BenchOptions opt;
    opt.heads = 2;
    opt.fixed_dim = 8;
    opt.reps = 3;
    const auto a = cott::run_sweep<double>(BenchImpl::CosineCausal, BenchAxis::Seq, {16, 32}, opt);
    const auto b = cott::run_sweep<double>(BenchImpl::CosineCausal, BenchAxis::Seq, {16, 32}, opt);
    REQUIRE(a.size() == 2);
    REQUIRE(b.size() == 2);
    CHECK(a[0].peak_bytes == b[0].peak_bytes);
    CHECK(a[1].peak_bytes == b[1].peak_bytes);
}

TEST_CASE("run_sweep: scan workspace stays flat while the softmax scores grow quadratically") {
    cott::BenchOptions opt;
    opt.heads = 2;
    opt.fixed_dim = 8;
    opt.reps = 3;
    const std::vector<Index> points{128, 256, 512, 1024};
    const auto scan = cott::run_sweep<double>(BenchImpl::CosineCausal, BenchAxis::Seq, points, opt);
    for (const auto& rec : scan) {
        CHECK(rec.ok);
        CHECK(rec.peak_bytes == scan[0].peak_bytes);
    }
    const auto soft = cott::run_sweep<double>(BenchImpl::Softmax, BenchAxis::Seq, {256, 512}, opt);
    const double ratio =
        static_cast<double>(soft[1].peak_bytes) / static_cast<double>(soft[0].peak_bytes);
    CHECK(ratio > 3.2);
    CHECK(ratio < 4.8);
}
