#include "obeam/emit.hpp"

#include "obeam/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace obeam {

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
    return out;
}

void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

}  // namespace

void emit_trace(const RunTrace& trace, const std::string& path) {
    static const char* cols[] = {"mass", "energy", "F", "potential_term"};
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<const std::vector<double>*> series;
    for (const char* c : cols) {
        auto it = trace.scalars().find(c);
        series.push_back(it == trace.scalars().end() ? nullptr : &it->second);
    }
    auto out = open_out(path);
    out << "t,mass,energy,F,potential_term\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        out << format_double(trace.times()[i]);
        for (const auto* s : series) out << ',' << format_double(s && i < s->size() ? (*s)[i] : nan);
        out << '\n';
    }
    finish(out, path);
}

void emit_checks(const std::vector<BoundCheck>& checks, const std::string& path) {
    auto out = open_out(path);
    out << "name,lhs,rhs,fitted_constant,pass\n";
    for (const auto& c : checks)
        out << c.name << ',' << format_double(c.lhs) << ',' << format_double(c.rhs) << ','
            << format_double(c.fitted_constant) << ',' << (c.pass ? 1 : 0) << '\n';
    finish(out, path);
}

void emit_table(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows,
                const std::string& path) {
    auto out = open_out(path);
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
    for (const auto& r : rows) {
        if (r.size() != header.size()) throw Error(ErrorKind::InvalidArgument, "row width does not match header");
        for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << format_double(r[j]);
        out << '\n';
    }
    finish(out, path);
}

}  // namespace obeam
