#include "upseg/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "upseg/errors.hpp"

namespace upseg {
namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigError("invalid value '" + value + "' for " + key);
    }
    return out;
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid number '" + value + "' for " + key);
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("invalid boolean '" + value + "' for " + key);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <typename T>
std::string join(const T& items) {
    std::ostringstream os;
    bool first = true;
    for (const auto& v : items) {
        if (!first) os << ',';
        os << v;
        first = false;
    }
    return os.str();
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    auto as_int = [&] { return parse_number<int>(key, value); };
    if (key == "model.in_channels") backbone.in_channels = as_int();
    else if (key == "model.base_channels") backbone.base_channels = as_int();
    else if (key == "model.depth") backbone.depth = as_int();
    else if (key == "model.num_classes") {
        backbone.num_classes = stack.num_classes = data.num_classes = as_int();
    } else if (key == "model.upscale_stages") {
        stack.num_stages = loss.num_stages = as_int();
    } else if (key == "model.use_skips") stack.use_skips = parse_bool(key, value);
    else if (key == "model.stage_relu") stack.stage_relu = parse_bool(key, value);
    else if (key == "model.skip_exempt_stages") {
        stack.skip_exempt_stages.clear();
        for (const auto& s : split_list(value)) stack.skip_exempt_stages.insert(parse_number<int>(key, s));
    } else if (key == "loss.base_loss") {
        if (value != "cross_entropy") throw ConfigError("loss.base_loss supports only cross_entropy");
    } else if (key == "loss.stage_weights") {
        loss.stage_weights.clear();
        for (const auto& s : split_list(value)) loss.stage_weights.push_back(parse_real(key, s));
    } else if (key == "optimizer.kind") optimizer.kind = value;
    else if (key == "optimizer.lr") optimizer.lr = parse_real(key, value);
    else if (key == "optimizer.batch_size") optimizer.batch_size = as_int();
    else if (key == "optimizer.max_epochs") optimizer.max_epochs = as_int();
    else if (key == "optimizer.seed") optimizer.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "optimizer.patience") optimizer.patience = as_int();
    else if (key == "optimizer.min_delta") optimizer.min_delta = parse_real(key, value);
    else if (key == "data.num_samples") data.num_samples = parse_number<std::int64_t>(key, value);
    else if (key == "data.input_res") data.input_res = as_int();
    else if (key == "data.gt_res") data.gt_res = as_int();
    else if (key == "data.shape_family") data.shape_family = parse_shape_family(value);
    else if (key == "data.noise_level") data.noise_level = parse_real(key, value);
    else if (key == "data.seed") data.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "data.min_shapes") data.min_shapes = as_int();
    else if (key == "data.max_shapes") data.max_shapes = as_int();
    else if (key == "data.path") data_path = value;
    else if (key == "data.val_fraction") val_fraction = parse_real(key, value);
    else if (key == "eval.report_path") report_path = value;
    else throw ConfigError("unknown key '" + key + "'");
}

RunConfig RunConfig::parse(std::string_view text, const std::string& source) {
    RunConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const std::string where = source + ":" + std::to_string(number) + ": ";
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected 'section.key = value'");
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        if (key.find('.') == std::string::npos) {
            throw ConfigError(where + "key '" + key + "' lacks a section prefix");
        }
        try {
            cfg.set(key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
}

void RunConfig::validate() const {
    backbone.validate();
    stack.validate();
    loss.validate();
    data.validate();
    if (optimizer.kind != "adam" && optimizer.kind != "sgd") {
        throw ConfigError("optimizer.kind must be adam or sgd");
    }
    if (!(optimizer.lr > 0.0)) throw ConfigError("optimizer.lr must be positive");
    if (optimizer.batch_size < 1) throw ConfigError("optimizer.batch_size must be >= 1");
    if (optimizer.max_epochs < 1) throw ConfigError("optimizer.max_epochs must be >= 1");
    if (optimizer.patience < 1) throw ConfigError("optimizer.patience must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw ConfigError("data.val_fraction must lie in (0, 1)");
    }
    if (backbone.in_channels != 1) throw ConfigError("synthetic data has one channel; model.in_channels must be 1");
    if (data.input_res % (1 << backbone.depth) != 0) {
        throw ConfigError("data.input_res must be divisible by 2^model.depth");
    }
    if (stack.num_stages > 16 || data.gt_res % output_res() != 0) {
        throw ConfigError("data.gt_res must be a multiple of data.input_res * 2^model.upscale_stages");
    }
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "model.in_channels = " << backbone.in_channels << '\n'
       << "model.base_channels = " << backbone.base_channels << '\n'
       << "model.depth = " << backbone.depth << '\n'
       << "model.num_classes = " << backbone.num_classes << '\n'
       << "model.upscale_stages = " << stack.num_stages << '\n'
       << "model.use_skips = " << (stack.use_skips ? "true" : "false") << '\n'
       << "model.skip_exempt_stages = " << join(stack.skip_exempt_stages) << '\n'
       << "model.stage_relu = " << (stack.stage_relu ? "true" : "false") << '\n'
       << "loss.base_loss = cross_entropy\n";
    if (!loss.stage_weights.empty()) os << "loss.stage_weights = " << join(loss.stage_weights) << '\n';
    os << "optimizer.kind = " << optimizer.kind << '\n'
       << "optimizer.lr = " << optimizer.lr << '\n'
       << "optimizer.batch_size = " << optimizer.batch_size << '\n'
       << "optimizer.max_epochs = " << optimizer.max_epochs << '\n'
       << "optimizer.seed = " << optimizer.seed << '\n'
       << "optimizer.patience = " << optimizer.patience << '\n'
       << "optimizer.min_delta = " << optimizer.min_delta << '\n'
       << "data.num_samples = " << data.num_samples << '\n'
       << "data.input_res = " << data.input_res << '\n'
       << "data.gt_res = " << data.gt_res << '\n'
       << "data.shape_family = " << shape_family_name(data.shape_family) << '\n'
       << "data.noise_level = " << data.noise_level << '\n'
       << "data.seed = " << data.seed << '\n'
       << "data.min_shapes = " << data.min_shapes << '\n'
       << "data.max_shapes = " << data.max_shapes << '\n'
       << "data.val_fraction = " << val_fraction << '\n';
    if (!data_path.empty()) os << "data.path = " << data_path << '\n';
    if (!report_path.empty()) os << "eval.report_path = " << report_path << '\n';
    return os.str();
}

}  // namespace upseg
