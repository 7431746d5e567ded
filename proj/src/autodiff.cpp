#include "igcn/autodiff.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace igcn::ad {

GradCheckResult gradient_check(ParameterStore<double>& params, const BuildFn& build, double h,
                               std::uint64_t seed, int samples_per_param, double denom_floor) {
    if (h <= 0.0) throw ValidationError("gradient_check: h must be positive");

    const auto run_forward = [&]() {
        Tape<double> tape;
        std::vector<NodeId> leaves;
        leaves.reserve(params.count());
        for (const auto& e : params.entries) leaves.push_back(tape.leaf(e.value));
        const NodeId out = build(tape, leaves);
        return tape.val(out).v[0];
    };

    // Analytic gradients in one reverse sweep.
    std::vector<Tensor<double>> analytic;
    {
        Tape<double> tape;
        std::vector<NodeId> leaves;
        for (const auto& e : params.entries) leaves.push_back(tape.leaf(e.value));
        const NodeId out = build(tape, leaves);
        tape.backward(out);
        for (const NodeId id : leaves) analytic.push_back(tape.grad(id));
    }

    GradCheckResult result;
    Rng rng(derive_seed(seed, 0xFDC));
    for (std::size_t pi = 0; pi < params.count(); ++pi) {
        auto& value = params.entries[pi].value;
        const std::int64_t count = value.size();
        const int checks = std::min<std::int64_t>(samples_per_param, count);
        for (int c = 0; c < checks; ++c) {
            const std::int64_t j =
                count == checks ? c : rng.uniform_int(0, static_cast<int>(count - 1));
            const double orig = value.v[static_cast<std::size_t>(j)];
            value.v[static_cast<std::size_t>(j)] = orig + h;
            const double fp = run_forward();
            value.v[static_cast<std::size_t>(j)] = orig - h;
            const double fm = run_forward();
            value.v[static_cast<std::size_t>(j)] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double an = analytic[pi].v[static_cast<std::size_t>(j)];
            const double denom = std::max({std::abs(an), std::abs(fd), denom_floor});
            const double rel = std::abs(an - fd) / denom;
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.worst_param = params.entries[pi].name;
            }
        }
    }
    return result;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore<float>& params,
                     const CheckpointMeta& meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("checkpoint: cannot write " + path.string());
    char buf[256];
    out << "IGCN-CKPT 1\n";
    out << "step " << meta.step << '\n';
    std::snprintf(buf, sizeof(buf), "lr %.17g\nbeta1 %.17g\nbeta2 %.17g\neps %.17g\n", meta.lr,
                  meta.beta1, meta.beta2, meta.eps);
    out << buf;
    for (const auto& [k, v] : meta.extra) out << "meta " << k << ' ' << v << '\n';
    out << "params " << params.count() << '\n';
    for (const auto& e : params.entries) {
        out << e.name << ' ' << e.value.rank();
        for (int d : e.value.shape) out << ' ' << d;
        out << '\n';
    }
    out << "END\n";
    for (const auto& e : params.entries)
        out.write(reinterpret_cast<const char*>(e.value.v.data()),
                  static_cast<std::streamsize>(e.value.v.size() * sizeof(float)));
}

std::pair<ParameterStore<float>, CheckpointMeta> load_checkpoint(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("checkpoint: cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "IGCN-CKPT 1") throw ValidationError("checkpoint: bad magic in " + path.string());
    CheckpointMeta meta;
    ParameterStore<float> params;
    long n_params = -1;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "step") ss >> meta.step;
        else if (key == "lr") ss >> meta.lr;
        else if (key == "beta1") ss >> meta.beta1;
        else if (key == "beta2") ss >> meta.beta2;
        else if (key == "eps") ss >> meta.eps;
        else if (key == "meta") {
            std::string mk, mv;
            ss >> mk;
            std::getline(ss, mv);
            if (!mv.empty() && mv.front() == ' ') mv.erase(mv.begin());
            meta.set(mk, mv);
        } else if (key == "params") {
            ss >> n_params;
            break;
        }
    }
    if (n_params < 0) throw ValidationError("checkpoint: missing params section");
    for (long i = 0; i < n_params; ++i) {
        if (!std::getline(in, line)) throw ValidationError("checkpoint: truncated header");
        std::istringstream ss(line);
        std::string name;
        int rank = 0;
        ss >> name >> rank;
        std::vector<int> shape(static_cast<std::size_t>(rank));
        for (auto& d : shape)
            if (!(ss >> d)) throw ValidationError("checkpoint: malformed shape for " + name);
        params.add(name, shape);
    }
    std::getline(in, line);
    if (line != "END") throw ValidationError("checkpoint: missing END marker");
    for (auto& e : params.entries) {
        in.read(reinterpret_cast<char*>(e.value.v.data()),
                static_cast<std::streamsize>(e.value.v.size() * sizeof(float)));
        if (!in) throw ValidationError("checkpoint: truncated payload for " + e.name);
    }
    return {std::move(params), std::move(meta)};
}

} // namespace igcn::ad
