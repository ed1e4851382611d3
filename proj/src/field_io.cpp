#include "neinfer/field_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "neinfer/error.hpp"

namespace neinfer {

namespace {

bool parse_double(std::string_view text, double& out) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
        text.remove_suffix(1);
    }
    if (text.empty()) return false;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

bool is_blank(const std::string& line) {
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

CellField read_field(const std::filesystem::path& path) {
    const std::string file = path.string();
    std::ifstream in(path);
    if (!in) throw IngestionError(file, 0, "cannot open file");

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw IngestionError(file, 1, "missing header line");
    ++line_no;

    CellField field;
    {
        std::istringstream header(line);
        std::string hash, tag;
        header >> hash >> tag >> field.name >> field.dims[0] >> field.dims[1] >> field.dims[2];
        if (!header || hash != "#" || tag != "field") {
            throw IngestionError(file, line_no,
                                 "expected header '# field <name> <nx> <ny> <nz>'");
        }
        for (int d : field.dims) {
            if (d < 1) throw IngestionError(file, line_no, "header dimensions must be >= 1");
        }
    }

    const std::size_t expected = static_cast<std::size_t>(field.dims[0]) *
                                 static_cast<std::size_t>(field.dims[1]) *
                                 static_cast<std::size_t>(field.dims[2]);
    field.values.reserve(expected);
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        if (field.values.size() == expected) {
            throw IngestionError(file, line_no,
                                 "more than " + std::to_string(expected) + " values");
        }
        double v = 0.0;
        if (!parse_double(line, v)) throw IngestionError(file, line_no, "not a number: '" + line + "'");
        field.values.push_back(v);
        field.value_lines.push_back(line_no);
    }
    if (field.values.size() != expected) {
        throw IngestionError(file, line_no + 1,
                             "unexpected end of file: got " + std::to_string(field.values.size()) +
                                 " values, expected " + std::to_string(expected));
    }
    return field;
}

void write_field(const std::filesystem::path& path, const CellField& field) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write field file " + path.string());
    out << "# field " << field.name << ' ' << field.dims[0] << ' ' << field.dims[1] << ' '
        << field.dims[2] << '\n';
    char buf[32];
    for (double v : field.values) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        out << buf;
    }
    if (!out) throw Error("write failed for " + path.string());
}

}  // namespace neinfer
