#include "ruler/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "ruler/errors.hpp"
#include "ruler/rng.hpp"

namespace ruler::data {

void TabularDataset::validate() const {
    if (n == 0 || d == 0) throw DimMismatch("empty dataset");
    if (features.size() != n * d) throw DimMismatch("feature buffer size mismatch");
    if (labels.size() != n) throw DimMismatch("label count mismatch");
    for (double v : features)
        if (!std::isfinite(v)) throw NonFiniteInput("non-finite feature value");
    std::size_t count1 = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw NonBinaryLabel("label outside {0,1}");
        count1 += static_cast<std::size_t>(y);
    }
    if (count1 == 0 || count1 == n)
        throw NonBinaryLabel("dataset does not contain both classes");
}

std::uint64_t TabularDataset::fingerprint() const {
    std::uint64_t h = rng::fnv1a64(name);
    std::uint64_t shape[2] = {n, d};
    h = rng::fnv1a64(shape, sizeof(shape), h);
    h = rng::fnv1a64(features.data(), features.size() * sizeof(double), h);
    std::vector<std::int32_t> ys(labels.begin(), labels.end());
    return rng::fnv1a64(ys.data(), ys.size() * sizeof(std::int32_t), h);
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

double parse_cell(const std::string& field, std::size_t row, std::size_t col) {
    std::size_t b = field.find_first_not_of(" \t");
    if (b == std::string::npos) throw ParseError(row, col, "empty cell");
    std::size_t e = field.find_last_not_of(" \t");
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data() + b, field.data() + e + 1, v);
    if (ec != std::errc() || ptr != field.data() + e + 1)
        throw ParseError(row, col, "not a number: '" + field + "'");
    if (!std::isfinite(v)) throw ParseError(row, col, "non-finite value: '" + field + "'");
    return v;
}

}  // namespace

TabularDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                        const BinarizeRule& rule) {
    std::ifstream in(path);
    if (!in) throw FileFormatError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw FileFormatError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = split_fields(line);
    std::size_t label_col = header.size();
    if (label_column.empty()) {
        label_col = header.size() - 1;  // default: last column holds the label
    } else {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == label_column) label_col = i;
        if (label_col == header.size())
            throw ConfigError("label column '" + label_column + "' not in CSV header");
    }
    if (header.size() < 2)
        throw FileFormatError(path.string() + ": need at least one feature column");

    TabularDataset ds;
    ds.name = path.stem().string();
    ds.d = header.size() - 1;
    std::vector<long long> raw_labels;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        std::vector<std::string> fields = split_fields(line);
        if (fields.size() != header.size())
            throw ParseError(row, 0,
                             "expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(fields.size()));
        for (std::size_t c = 0; c < fields.size(); ++c) {
            double v = parse_cell(fields[c], row, c + 1);
            if (c == label_col) {
                if (v != std::floor(v) || std::fabs(v) > 1e15)
                    throw NonBinaryLabel("non-integral label '" + fields[c] + "' at row " +
                                         std::to_string(row));
                raw_labels.push_back(std::llround(v));
            } else {
                ds.features.push_back(v);
            }
        }
    }
    ds.n = row;
    if (ds.n < 50) throw DatasetTooSmall("CSV has " + std::to_string(ds.n) + " records, need 50");

    std::map<long long, std::size_t> freq;
    for (long long y : raw_labels) ++freq[y];

    auto map_labels = [&](auto&& to_binary) {
        ds.labels.reserve(raw_labels.size());
        for (long long y : raw_labels) ds.labels.push_back(to_binary(y) ? 1 : 0);
    };
    switch (rule.kind) {
        case BinarizeRule::Kind::auto_two_class: {
            if (freq.size() != 2)
                throw NonBinaryLabel("label column has " + std::to_string(freq.size()) +
                                     " distinct values; pick a binarisation rule");
            long long hi = freq.rbegin()->first;
            map_labels([&](long long y) { return y == hi; });
            break;
        }
        case BinarizeRule::Kind::majority_vs_rest: {
            long long majority = 0;
            std::size_t best = 0;
            for (auto& [value, count] : freq)
                if (count > best) { best = count; majority = value; }
            map_labels([&](long long y) { return y == majority; });
            break;
        }
        case BinarizeRule::Kind::positive_class:
            map_labels([&](long long y) { return y == rule.positive; });
            break;
    }
    std::size_t ones = 0;
    for (int y : ds.labels) ones += static_cast<std::size_t>(y);
    if (ones == 0 || ones == ds.n)
        throw NonBinaryLabel("binarisation produced a single class");
    ds.validate();
    return ds;
}

std::vector<std::size_t> PartitionSpec::train() const {
    std::vector<std::size_t> out;
    out.reserve(retain.size() + forget.size());
    std::merge(retain.begin(), retain.end(), forget.begin(), forget.end(),
               std::back_inserter(out));
    return out;
}

void PartitionSpec::validate(std::size_t n) const {
    if (retain.empty()) throw EmptyRetainSet("empty retain set");
    if (forget.empty()) throw EmptyForgetSet("empty forget set");
    if (test.empty()) throw PartitionInvalid("empty test set");
    if (!(ff > 0.0 && ff < 1.0)) throw PartitionInvalid("forget fraction outside (0,1)");
    if (retain.size() + forget.size() + test.size() != n)
        throw PartitionInvalid("partition sizes do not sum to record count");
    std::vector<char> seen(n, 0);
    for (const auto* part : {&retain, &forget, &test}) {
        for (std::size_t i = 0; i < part->size(); ++i) {
            std::size_t r = (*part)[i];
            if (r >= n) throw PartitionInvalid("record index out of range");
            if (i > 0 && (*part)[i - 1] >= r) throw PartitionInvalid("indices not sorted unique");
            if (seen[r]) throw PartitionInvalid("record appears in two parts");
            seen[r] = 1;
        }
    }
}

namespace {

nlohmann::ordered_json indices_json(const std::vector<std::size_t>& v) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (std::size_t i : v) a.push_back(i);
    return a;
}

std::vector<std::size_t> indices_from_json(const nlohmann::json& a, const char* field) {
    if (!a.is_array()) throw FileFormatError(std::string("partition field '") + field + "' not an array");
    std::vector<std::size_t> out;
    out.reserve(a.size());
    for (const auto& v : a) {
        if (!v.is_number_unsigned() && !v.is_number_integer())
            throw FileFormatError(std::string("non-integer index in '") + field + "'");
        long long x = v.get<long long>();
        if (x < 0) throw FileFormatError(std::string("negative index in '") + field + "'");
        out.push_back(static_cast<std::size_t>(x));
    }
    return out;
}

}  // namespace

void write_partition(const std::filesystem::path& path, const PartitionSpec& p) {
    nlohmann::ordered_json j;
    j["retain"] = indices_json(p.retain);
    j["forget"] = indices_json(p.forget);
    j["test"] = indices_json(p.test);
    j["ff"] = p.ff;
    j["split_seed"] = p.split_seed;
    j["forget_seed"] = p.forget_seed;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FileFormatError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
    if (!out) throw FileFormatError("short write to " + path.string());
}

PartitionSpec read_partition(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileFormatError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FileFormatError(path.string() + ": " + e.what());
    }
    PartitionSpec p;
    p.retain = indices_from_json(j.value("retain", nlohmann::json::array()), "retain");
    p.forget = indices_from_json(j.value("forget", nlohmann::json::array()), "forget");
    p.test = indices_from_json(j.value("test", nlohmann::json::array()), "test");
    if (!j.contains("ff") || !j["ff"].is_number())
        throw FileFormatError(path.string() + ": missing ff");
    p.ff = j["ff"].get<double>();
    p.split_seed = j.value("split_seed", 0ULL);
    p.forget_seed = j.value("forget_seed", 0ULL);
    p.validate(p.retain.size() + p.forget.size() + p.test.size());
    return p;
}

SplitResult stratified_split(const TabularDataset& ds, double test_frac, std::uint64_t seed) {
    if (!(test_frac > 0.0 && test_frac < 1.0))
        throw OutOfRange("test fraction outside (0,1)");
    std::vector<std::size_t> by_class[2];
    for (std::size_t r = 0; r < ds.n; ++r)
        by_class[ds.labels[r]].push_back(r);

    rng::Pcg32 g = rng::make_stream("split", ds.name, seed);
    SplitResult out;
    for (auto& members : by_class) {
        if (members.size() < 2)
            throw DegenerateClass("class with fewer than 2 records cannot be stratified");
        for (std::size_t i = 0; i + 1 < members.size(); ++i) {
            std::size_t j = i + static_cast<std::size_t>(g.next_below(members.size() - i));
            std::swap(members[i], members[j]);
        }
        std::size_t want = static_cast<std::size_t>(
            std::floor(test_frac * static_cast<double>(members.size()) + 0.5));
        want = std::clamp<std::size_t>(want, 1, members.size() - 1);
        out.test.insert(out.test.end(), members.begin(), members.begin() + want);
        out.train.insert(out.train.end(), members.begin() + want, members.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

std::vector<std::size_t> sample_forget_set(const std::vector<std::size_t>& train_idx,
                                           double ff, std::uint64_t seed,
                                           const std::string& dataset_name) {
    if (train_idx.size() <= 10)
        throw DatasetTooSmall("need more than 10 train records to sample a forget set");
    if (!(ff > 0.0 && ff < 1.0)) throw OutOfRange("forget fraction outside (0,1)");
    std::size_t k = static_cast<std::size_t>(
        std::floor(ff * static_cast<double>(train_idx.size())));
    k = std::max<std::size_t>(k, 10);
    if (train_idx.size() - k < 2)
        throw RetainTooSmall("forget set would leave fewer than 2 retain records");
    rng::Pcg32 g = rng::make_stream("forget", dataset_name, seed);
    return rng::sample_without_replacement(train_idx, k, g);
}

PartitionSpec make_partition(const TabularDataset& ds, double test_frac, double ff,
                             std::uint64_t split_seed, std::uint64_t forget_seed) {
    SplitResult split = stratified_split(ds, test_frac, split_seed);
    PartitionSpec p;
    p.forget = sample_forget_set(split.train, ff, forget_seed, ds.name);
    p.retain.reserve(split.train.size() - p.forget.size());
    std::set_difference(split.train.begin(), split.train.end(), p.forget.begin(),
                        p.forget.end(), std::back_inserter(p.retain));
    p.test = std::move(split.test);
    p.ff = ff;
    p.split_seed = split_seed;
    p.forget_seed = forget_seed;
    p.validate(ds.n);
    return p;
}

Standardizer Standardizer::fit(const TabularDataset& ds, const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw EmptyPopulation("cannot fit standardizer on no records");
    Standardizer s;
    s.mean.assign(ds.d, 0.0);
    s.inv_std.assign(ds.d, 0.0);
    for (std::size_t r : idx) {
        const double* x = ds.row(r);
        for (std::size_t j = 0; j < ds.d; ++j) s.mean[j] += x[j];
    }
    double inv_n = 1.0 / static_cast<double>(idx.size());
    for (std::size_t j = 0; j < ds.d; ++j) s.mean[j] *= inv_n;
    std::vector<double> var(ds.d, 0.0);
    for (std::size_t r : idx) {
        const double* x = ds.row(r);
        for (std::size_t j = 0; j < ds.d; ++j) {
            double c = x[j] - s.mean[j];
            var[j] += c * c;
        }
    }
    for (std::size_t j = 0; j < ds.d; ++j) {
        double sd = std::sqrt(var[j] * inv_n);
        s.inv_std[j] = sd < 1e-12 ? 0.0 : 1.0 / sd;
    }
    return s;
}

std::vector<double> Standardizer::transform(const TabularDataset& ds) const {
    if (mean.size() != ds.d) throw DimMismatch("standardizer fitted on different width");
    std::vector<double> out(ds.n * ds.d);
    for (std::size_t r = 0; r < ds.n; ++r) {
        const double* x = ds.row(r);
        for (std::size_t j = 0; j < ds.d; ++j)
            out[r * ds.d + j] = (x[j] - mean[j]) * inv_std[j];
    }
    return out;
}

SyntheticDataset make_synthetic(const SyntheticSpec& spec) {
    if (spec.n < 50) throw DatasetTooSmall("synthetic dataset needs at least 50 records");
    if (spec.d == 0) throw OutOfRange("synthetic dataset needs at least one feature");
    if (spec.class_sep < 0.0 || spec.memorization_strength < 0.0)
        throw OutOfRange("class_sep and memorization_strength must be non-negative");

    rng::Pcg32 g = rng::make_stream("synthetic", spec.name, spec.seed);

    std::vector<double> dir(spec.d);
    double norm2 = 0.0;
    for (double& v : dir) {
        v = g.next_gaussian();
        norm2 += v * v;
    }
    double norm = std::sqrt(norm2);
    if (norm < 1e-9) { dir.assign(spec.d, 0.0); dir[0] = 1.0; norm = 1.0; }
    for (double& v : dir) v /= norm;

    constexpr std::size_t kClusterSize = 4;
    std::size_t n_plant = 0;
    if (spec.memorization_strength > 0.0) {
        double want = 0.06 * static_cast<double>(spec.n) *
                      std::min(spec.memorization_strength, 2.0);
        std::size_t clusters = static_cast<std::size_t>(std::floor(want / kClusterSize + 0.5));
        clusters = std::max<std::size_t>(clusters, 1);
        n_plant = std::min(clusters * kClusterSize, spec.n / 4);
    }
    std::size_t n_base = spec.n - n_plant;

    SyntheticDataset out;
    out.ds.name = spec.name;
    out.ds.n = spec.n;
    out.ds.d = spec.d;
    out.ds.features.reserve(spec.n * spec.d);
    out.ds.labels.reserve(spec.n);

    auto push_record = [&](int blob_class, int label, const double* center, double jitter) {
        double shift = (blob_class == 1 ? 0.5 : -0.5) * spec.class_sep;
        for (std::size_t j = 0; j < spec.d; ++j) {
            double x = shift * dir[j] + (center ? center[j] : 0.0) + jitter * g.next_gaussian();
            out.ds.features.push_back(x);
        }
        out.ds.labels.push_back(label);
    };

    for (std::size_t i = 0; i < n_base; ++i) {
        int y = static_cast<int>(g.next_below(2));
        push_record(y, y, nullptr, 1.0);
    }

    // Planted probes: tight clusters whose label contradicts the blob they sit
    // in, so a model can only fit them by memorising the individual records.
    std::vector<double> center(spec.d);
    for (std::size_t t = 0; t * kClusterSize < n_plant; ++t) {
        int blob = static_cast<int>(g.next_below(2));
        for (double& c : center) c = g.next_gaussian();
        for (std::size_t c = 0; c < kClusterSize; ++c) {
            out.planted.push_back(out.ds.labels.size());
            push_record(blob, 1 - blob, center.data(), 0.02);
        }
    }

    // Guarantee at least two records of each class.
    for (int cls : {0, 1}) {
        std::size_t count = 0;
        for (int y : out.ds.labels) count += static_cast<std::size_t>(y == cls);
        for (std::size_t i = 0; count < 2 && i < n_base; ++i) {
            if (out.ds.labels[i] != cls) { out.ds.labels[i] = cls; ++count; }
        }
    }

    out.ds.validate();
    return out;
}

}  // namespace ruler::data
