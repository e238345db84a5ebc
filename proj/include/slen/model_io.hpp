#pragma once

// Text key-value serialization of mixture models.
//
//   model 1.k2.5
//   order 1
//   k 2
//   alpha 0.40000000000000002
//   p 0.5 0.25 0.25
//   k 5
//   ...
//
// Each `k` line opens a component; `alpha` and `p` (p_{-1} .. p_r) follow it.
// Reals are printed with 17 significant digits, so files round-trip exactly.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "slen/error.hpp"
#include "slen/walk.hpp"

namespace slen {

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_model(std::ostream& out, const MixtureModel& m) {
    out << "model " << m.id() << '\n';
    out << "order " << m.order() << '\n';
    for (std::size_t j = 0; j < m.components(); ++j) {
        out << "k " << m.valency(j) << '\n';
        out << "alpha " << format_real(m.weight(j)) << '\n';
        out << "p";
        for (double p : m.steps(j).probs()) out << ' ' << format_real(p);
        out << '\n';
    }
}

inline std::string to_string(const MixtureModel& m) {
    std::ostringstream s;
    write_model(s, m);
    return s.str();
}

inline MixtureModel read_model(std::istream& in) {
    struct Pending {
        int k = 0;
        double alpha = -1;
        std::vector<double> p;
    };
    std::vector<Pending> comps;
    int order = 0;
    std::string declared_id;
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& what) {
        return input_error("model file line " + std::to_string(line_no) + ": " + what);
    };
    auto parse_real = [&](const std::string& tok) {
        char* end = nullptr;
        double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') throw fail("bad number '" + tok + "'");
        return v;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        std::istringstream fields(line);
        std::string key;
        fields >> key;
        std::vector<std::string> values;
        for (std::string v; fields >> v;) values.push_back(v);
        if (key == "model") {
            if (values.size() != 1) throw fail("expected one id");
            declared_id = values[0];
        } else if (key == "order") {
            if (values.size() != 1) throw fail("expected one order");
            order = static_cast<int>(parse_real(values[0]));
        } else if (key == "k") {
            if (values.size() != 1) throw fail("expected one valency");
            comps.push_back({static_cast<int>(parse_real(values[0])), -1, {}});
        } else if (key == "alpha" || key == "p") {
            if (comps.empty()) throw fail("'" + key + "' before any 'k'");
            if (key == "alpha") {
                if (values.size() != 1) throw fail("expected one weight");
                comps.back().alpha = parse_real(values[0]);
            } else {
                for (const auto& v : values) comps.back().p.push_back(parse_real(v));
            }
        } else {
            throw fail("unknown key '" + key + "'");
        }
    }
    if (in.bad()) throw input_error("read failure in model file");
    if (comps.empty()) throw input_error("model file has no components");
    std::vector<int> ks;
    std::vector<double> alphas;
    std::vector<StepLaw> steps;
    try {
        for (const auto& c : comps) {
            if (c.alpha < 0) throw input_error("component k=" + std::to_string(c.k) + " lacks alpha");
            ks.push_back(c.k);
            alphas.push_back(c.alpha);
            steps.emplace_back(c.p);
        }
        MixtureModel m(ks, alphas, steps);
        if (order != 0 && order != m.order()) throw input_error("order line disagrees with step laws");
        if (!declared_id.empty() && parse_model_id(declared_id) != m.structure())
            throw input_error("model id disagrees with components");
        return m;
    } catch (const std::invalid_argument& e) {
        throw input_error(std::string("invalid model: ") + e.what());
    }
}

inline MixtureModel parse_model(const std::string& text) {
    std::istringstream s(text);
    return read_model(s);
}

inline MixtureModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open model file " + path);
    return read_model(in);
}

inline void save_model(const std::string& path, const MixtureModel& m) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot write model file " + path);
    write_model(out, m);
}

} // namespace slen
