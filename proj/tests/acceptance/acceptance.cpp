#include "agem/verify.hpp"

#include <cstdio>
#include <cstdlib>
#include <string>

int main(int argc, char** argv) {
    int first = 1;
    int last = agem::verify::kCriterionCount;
    if (argc > 1) first = last = std::atoi(argv[1]);

    int failures = 0;
    for (int i = first; i <= last; ++i) {
        const auto r = agem::verify::criterion(i);
        std::printf("%s\n", agem::verify::format_line(r).c_str());
        std::fflush(stdout);
        if (!r.ok()) ++failures;
    }
    std::printf("%d of %d acceptance criteria passed\n", last - first + 1 - failures,
                last - first + 1);
    return failures == 0 ? 0 : 1;
}
