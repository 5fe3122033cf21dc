// Serial reference against the OpenMP paths: replicate trajectories and
// audit trial sweeps. Also checks that both paths agree bit for bit.

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "adprec/audit.hpp"

namespace {

template <class F>
double seconds(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool same_records(const adprec::ReplicateSummary& a, const adprec::ReplicateSummary& b) {
    if (a.mean.size() != b.mean.size()) {
        return false;
    }
    for (std::size_t k = 0; k < a.mean.size(); ++k) {
        for (const auto& f : adprec::record_fields()) {
            if (!(a.mean[k].*f.member == b.mean[k].*f.member)) {
                return false;
            }
        }
    }
    return true;
}

} // namespace

int main(int argc, char** argv) {
    using namespace adprec;
    const std::size_t replicates = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 16;
    const std::size_t iters = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 2000;
    const std::size_t trials = argc > 3 ? std::strtoul(argv[3], nullptr, 10) : 2000;
    std::printf("threads=%d replicates=%zu iters=%zu trials=%zu\n", thread_cap(), replicates, iters, trials);

    const Scenario sc = rate_scenario(iters, 7);
    ReplicateSummary par;
    ReplicateSummary ser;
    const double tp = seconds([&] { par = run_replicates(sc.problem, sc.noise, sc.config, replicates); });
    const double ts = seconds([&] { ser = run_replicates_serial(sc.problem, sc.noise, sc.config, replicates); });
    std::printf("replicates  serial %8.3fs  parallel %8.3fs  speedup %5.2f  identical=%s\n", ts, tp, ts / tp,
                same_records(par, ser) ? "yes" : "NO");

    AuditReport ap;
    AuditReport as;
    const double ap_t = seconds([&] { ap = audit_sqrt_trace(trials, 1, 8, 11, Execution::Parallel); });
    const double as_t = seconds([&] { as = audit_sqrt_trace(trials, 1, 8, 11, Execution::Serial); });
    std::printf("sqrt_trace  serial %8.3fs  parallel %8.3fs  speedup %5.2f  identical=%s\n", as_t, ap_t,
                as_t / ap_t, ap.worst_violation == as.worst_violation ? "yes" : "NO");

    const double ip_t = seconds(
        [&] { ap = audit_identity(GeometryTag::Shampoo, Identity::Ineq1, trials, 5, Execution::Parallel); });
    const double is_t = seconds(
        [&] { as = audit_identity(GeometryTag::Shampoo, Identity::Ineq1, trials, 5, Execution::Serial); });
    std::printf("identities  serial %8.3fs  parallel %8.3fs  speedup %5.2f  identical=%s\n", is_t, ip_t,
                is_t / ip_t, ap.worst_violation == as.worst_violation ? "yes" : "NO");
    return 0;
}
