#include "cryo/io.hpp"

#include <json.hpp>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cryo::io {

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string read_text(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void atomic_write(const std::filesystem::path& p, const std::string& content)
{
    if (p.has_parent_path())
        std::filesystem::create_directories(p.parent_path());
    std::filesystem::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out)
            throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, p);
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& field, const std::string& context)
{
    const char* b = field.c_str();
    while (*b == ' ')
        ++b;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(b, &end);
    while (end && *end == ' ')
        ++end;
    if (end == b || *end != '\0' || errno == ERANGE)
        throw std::invalid_argument(context + ": cannot parse number '" + field + "'");
    return v;
}

namespace {

std::vector<std::string> lines_of(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (!line.empty())
            out.push_back(line);
    }
    return out;
}

} // namespace

std::string waveform_csv(const Waveform& x)
{
    std::string out = "t_ns,value\n";
    for (Eigen::Index n = 0; n < x.size(); ++n)
        out += fmt(x.time(n)) + "," + fmt(x[n]) + "\n";
    return out;
}

Waveform parse_waveform_csv(const std::string& text)
{
    const auto lines = lines_of(text);
    if (lines.empty() || lines.front() != "t_ns,value")
        throw std::invalid_argument("waveform csv: expected header 't_ns,value'");
    const auto n = static_cast<Eigen::Index>(lines.size() - 1);
    if (n < 1)
        throw std::invalid_argument("waveform csv: no samples");
    Eigen::VectorXd t(n), v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto f = split_csv_line(lines[static_cast<size_t>(i) + 1]);
        const std::string ctx = "waveform csv line " + std::to_string(i + 2);
        if (f.size() != 2)
            throw std::invalid_argument(ctx + ": expected 2 fields");
        t[i] = parse_double(f[0], ctx);
        v[i] = parse_double(f[1], ctx);
    }
    double period = 1.0;
    if (n >= 2) {
        period = (t[n - 1] - t[0]) / static_cast<double>(n - 1);
        for (Eigen::Index i = 1; i < n; ++i)
            if (std::abs(t[i] - t[i - 1] - period) > 1e-6 * period)
                throw std::invalid_argument("waveform csv: non-uniform time grid at line "
                                            + std::to_string(i + 2));
    }
    return {std::move(v), period, t[0]};
}

std::string waveform_json(const Waveform& x)
{
    nlohmann::ordered_json j;
    j["t0"] = x.t0;
    j["sample_period"] = x.sample_period;
    j["samples"] = std::vector<double>(x.samples.data(), x.samples.data() + x.size());
    return j.dump(2) + "\n";
}

Waveform parse_waveform_json(const std::string& text)
{
    const auto j = nlohmann::json::parse(text);
    for (const auto& [k, v] : j.items())
        if (k != "t0" && k != "sample_period" && k != "samples")
            throw std::invalid_argument("waveform json: unknown key '" + k + "'");
    const auto s = j.at("samples").get<std::vector<double>>();
    return {Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size())),
            j.at("sample_period").get<double>(), j.value("t0", 0.0)};
}

Waveform load_waveform(const std::filesystem::path& p)
{
    const std::string text = read_text(p);
    if (p.extension() == ".json")
        return parse_waveform_json(text);
    return parse_waveform_csv(text);
}

std::string series_csv(const Eigen::VectorXd& t, const Eigen::VectorXd& value,
                       const Eigen::VectorXd& stderr_)
{
    std::string out = "t_ns,value,stderr\n";
    for (Eigen::Index i = 0; i < t.size(); ++i)
        out += fmt(t[i]) + "," + fmt(value[i]) + "," + fmt(stderr_[i]) + "\n";
    return out;
}

std::string axis_matrix_csv(const AxisMatrix& m)
{
    std::string out = m.corner;
    for (Eigen::Index j = 0; j < m.col_axis.size(); ++j)
        out += "," + fmt(m.col_axis[j]);
    out += "\n";
    for (Eigen::Index i = 0; i < m.row_axis.size(); ++i) {
        out += fmt(m.row_axis[i]);
        for (Eigen::Index j = 0; j < m.col_axis.size(); ++j)
            out += "," + fmt(m.values(i, j));
        out += "\n";
    }
    return out;
}

AxisMatrix parse_axis_matrix_csv(const std::string& text)
{
    const auto lines = lines_of(text);
    if (lines.size() < 2)
        throw std::invalid_argument("matrix csv: need a header row and at least one data row");
    const auto head = split_csv_line(lines[0]);
    AxisMatrix m;
    m.corner = head[0];
    const auto nc = static_cast<Eigen::Index>(head.size() - 1);
    const auto nr = static_cast<Eigen::Index>(lines.size() - 1);
    m.col_axis.resize(nc);
    for (Eigen::Index j = 0; j < nc; ++j)
        m.col_axis[j] = parse_double(head[static_cast<size_t>(j) + 1], "matrix csv header");
    m.row_axis.resize(nr);
    m.values.resize(nr, nc);
    for (Eigen::Index i = 0; i < nr; ++i) {
        const auto f = split_csv_line(lines[static_cast<size_t>(i) + 1]);
        const std::string ctx = "matrix csv line " + std::to_string(i + 2);
        if (static_cast<Eigen::Index>(f.size()) != nc + 1)
            throw std::invalid_argument(ctx + ": expected " + std::to_string(nc + 1) + " fields");
        m.row_axis[i] = parse_double(f[0], ctx);
        for (Eigen::Index j = 0; j < nc; ++j)
            m.values(i, j) = parse_double(f[static_cast<size_t>(j) + 1], ctx);
    }
    return m;
}

} // namespace cryo::io
