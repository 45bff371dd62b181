// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <iostream>

#include "optoweak/acceptance.hpp"

int main() {
    int failed = 0;
    const auto results = optoweak::run_acceptance({}, [&](const optoweak::CheckResult& r) {
        std::cout << optoweak::format_check(r) << std::endl;
        failed += r.passed ? 0 : 1;
    });
    std::cout << "summary: " << results.size() - failed << "/" << results.size() << " criteria passed" << std::endl;
    return failed ? 1 : 0;
}
