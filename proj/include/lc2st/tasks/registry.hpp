#ifndef LC2ST_TASKS_REGISTRY_HPP
#define LC2ST_TASKS_REGISTRY_HPP

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lc2st/tasks/distort.hpp"
#include "lc2st/tasks/gaussian.hpp"
#include "lc2st/tasks/two_moons.hpp"

namespace lc2st {

struct TaskOptions {
    int m = 0; // 0 = task default (2 for gaussian_conjugate, 10 for gaussian_linear_uniform)
    double noise_std = 1.0;
    double eps = 0.05;
    long budget = 20'000'000;
    double lo = -1.0;
    double hi = 1.0;
};

inline void to_json(nlohmann::json& j, const TaskOptions& o) {
    j = nlohmann::json{{"m", o.m}, {"noise_std", o.noise_std}, {"eps", o.eps},
                       {"budget", o.budget}, {"lo", o.lo}, {"hi", o.hi}};
}

inline void from_json(const nlohmann::json& j, TaskOptions& o) {
    o = TaskOptions{};
    if (j.contains("m")) j.at("m").get_to(o.m);
    if (j.contains("noise_std")) j.at("noise_std").get_to(o.noise_std);
    if (j.contains("eps")) j.at("eps").get_to(o.eps);
    if (j.contains("budget")) j.at("budget").get_to(o.budget);
    if (j.contains("lo")) j.at("lo").get_to(o.lo);
    if (j.contains("hi")) j.at("hi").get_to(o.hi);
}

inline const std::vector<std::string>& task_names() {
    static const std::vector<std::string> names{"gaussian_conjugate", "two_moons", "gaussian_mixture",
                                                "gaussian_linear_uniform"};
    return names;
}

inline std::shared_ptr<const Task> make_task(const std::string& name, const TaskOptions& opts = {}) {
    if (name == "gaussian_conjugate") {
        return gaussian_conjugate_task(opts.m > 0 ? opts.m : 2, opts.noise_std);
    }
    if (name == "two_moons") {
        return two_moons_task(opts.eps, opts.budget);
    }
    if (name == "gaussian_mixture") {
        return gaussian_mixture_task(opts.budget);
    }
    if (name == "gaussian_linear_uniform") {
        return gaussian_linear_uniform_task(opts.m > 0 ? opts.m : 10, opts.lo, opts.hi, opts.budget);
    }
    throw ConfigError("unknown task '" + name + "'");
}

} // namespace lc2st

#endif
