#include "sdf4d/common.hpp"

#include <algorithm>
#include <cmath>

namespace sdf4d {

void parallel_stripes(std::size_t n, const std::function<void(int, std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const int stripes = kReductionStripes;
    const std::size_t chunk = (n + stripes - 1) / stripes;

    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    const int workers = static_cast<int>(std::min<std::size_t>(hw, static_cast<std::size_t>(stripes)));

    if (workers <= 1) {
        for (int s = 0; s < stripes; ++s) {
            const std::size_t begin = std::min(n, static_cast<std::size_t>(s) * chunk);
            const std::size_t end = std::min(n, begin + chunk);
            if (begin < end) fn(s, begin, end);
        }
        return;
    }

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int s = w; s < stripes; s += workers) {
                const std::size_t begin = std::min(n, static_cast<std::size_t>(s) * chunk);
                const std::size_t end = std::min(n, begin + chunk);
                if (begin < end) fn(s, begin, end);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace sdf4d
