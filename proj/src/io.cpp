#include "os2e/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace os2e::io {

namespace {

struct CsvRow {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::string where(const fs::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

// Header first; blank lines skipped.
std::vector<CsvRow> read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<CsvRow> rows;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back({n, split_commas(line)});
    }
    if (rows.empty()) throw Error(path.string() + ": empty file, missing header");
    return rows;
}

void check_width(const fs::path& path, const CsvRow& row, std::size_t expected) {
    if (row.fields.size() != expected) {
        throw Error(where(path, row.line) + ": row length mismatch (expected " + std::to_string(expected) +
                    " fields, got " + std::to_string(row.fields.size()) + ")");
    }
}

std::size_t parse_index(const std::string& text, const std::string& at) {
    std::size_t v = 0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) throw Error(at + ": invalid integer '" + text + "'");
    return v;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

json matrix_json(const Matrix& m) {
    return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& at) {
    double v = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) throw Error(at + ": invalid number '" + text + "'");
    return v;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
}

// -----------------------------
// responses and labels
// -----------------------------
void write_response_csv(const fs::path& path, const ResponseMatrix& r) {
    auto out = open_out(path);
    out << "image_id";
    for (std::size_t c = 0; c < r.num_classes(); ++c) {
        out << ',' << (c < r.class_ids.size() ? r.class_ids[c] : "class_" + std::to_string(c));
    }
    out << '\n';
    for (std::size_t i = 0; i < r.num_images(); ++i) {
        out << (i < r.image_ids.size() ? r.image_ids[i] : std::to_string(i));
        for (double v : r.values.row(i)) out << ',' << format_double(v);
        out << '\n';
    }
}

ResponseMatrix read_response_csv(const fs::path& path, ConceptKind kind) {
    const auto rows = read_csv(path);
    const auto& header = rows.front();
    if (header.fields.size() < 2 || header.fields[0] != "image_id") {
        throw Error(where(path, header.line) + ": malformed header, expected image_id,<class ids>");
    }
    ResponseMatrix r;
    r.kind = kind;
    r.class_ids.assign(header.fields.begin() + 1, header.fields.end());
    const std::size_t c = r.class_ids.size();
    r.values = Matrix(rows.size() - 1, c);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        check_width(path, row, c + 1);
        r.image_ids.push_back(row.fields[0]);
        auto dst = r.values.row(i - 1);
        for (std::size_t k = 0; k < c; ++k) dst[k] = parse_double(row.fields[k + 1], where(path, row.line));
        if (!on_simplex(dst, kIngestSimplexTol)) throw Error(where(path, row.line) + ": unnormalized scores");
    }
    return r;
}

void write_labels_csv(const fs::path& path, const EventLabels& labels, const std::vector<std::string>& image_ids) {
    auto out = open_out(path);
    out << "image_id,event_index\n";
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        out << (i < image_ids.size() ? image_ids[i] : std::to_string(i)) << ',' << labels.labels[i] << '\n';
    }
}

EventLabels read_labels_csv(const fs::path& path, std::optional<std::size_t> num_events,
                            std::vector<std::string>* image_ids) {
    const auto rows = read_csv(path);
    const auto& header = rows.front();
    if (header.fields.size() != 2 || header.fields[0] != "image_id" || header.fields[1] != "event_index") {
        throw Error(where(path, header.line) + ": malformed header, expected image_id,event_index");
    }
    EventLabels out;
    std::size_t max_label = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        check_width(path, rows[i], 2);
        const std::size_t y = parse_index(rows[i].fields[1], where(path, rows[i].line));
        if (num_events && y >= *num_events) {
            throw Error(where(path, rows[i].line) + ": event label " + std::to_string(y) + " out of range");
        }
        max_label = std::max(max_label, y);
        out.labels.push_back(y);
        if (image_ids) image_ids->push_back(rows[i].fields[0]);
    }
    out.num_events = num_events ? *num_events : (out.labels.empty() ? 0 : max_label + 1);
    return out;
}

// -----------------------------
// tables and selection
// -----------------------------
json to_json(const ConditionalTable& t) {
    return json{{"type", "conditional_table"},
                {"num_classes", t.num_classes()},
                {"num_events", t.num_events()},
                {"cond", t.cond.data},
                {"prior", t.prior},
                {"counts", t.counts},
                {"total", t.total},
                {"class_ids", t.class_ids}};
}

ConditionalTable conditional_table_from_json(const json& j) {
    ConditionalTable t;
    const auto c = j.at("num_classes").get<std::size_t>();
    const auto m = j.at("num_events").get<std::size_t>();
    t.cond.rows = c;
    t.cond.cols = m;
    t.cond.data = j.at("cond").get<std::vector<double>>();
    if (t.cond.data.size() != c * m) throw Error("conditional table JSON: cond length does not match dims");
    t.prior = j.at("prior").get<std::vector<double>>();
    t.counts = j.value("counts", std::vector<std::size_t>{});
    t.total = j.value("total", std::size_t{0});
    if (t.counts.empty()) t.counts.assign(m, 0);
    t.class_ids = j.value("class_ids", std::vector<std::string>{});
    if (t.class_ids.empty()) {
        for (std::size_t o = 0; o < c; ++o) t.class_ids.push_back("class_" + std::to_string(o));
    }
    t.validate(kIngestSimplexTol);
    return t;
}

json to_json(const PosteriorTable& t) {
    std::vector<int> mask;
    for (bool b : t.undefined_mask) mask.push_back(b ? 1 : 0);
    return json{{"type", "posterior_table"}, {"num_classes", t.num_classes()}, {"num_events", t.num_events()},
                {"post", t.post.data}, {"marginal", t.marginal}, {"undefined_mask", mask}};
}

PosteriorTable posterior_table_from_json(const json& j) {
    PosteriorTable t;
    t.post.rows = j.at("num_classes").get<std::size_t>();
    t.post.cols = j.at("num_events").get<std::size_t>();
    t.post.data = j.at("post").get<std::vector<double>>();
    if (t.post.data.size() != t.post.rows * t.post.cols) throw Error("posterior JSON: post length does not match dims");
    t.marginal = j.at("marginal").get<std::vector<double>>();
    for (int b : j.at("undefined_mask").get<std::vector<int>>()) t.undefined_mask.push_back(b != 0);
    return t;
}

json to_json(const SelectionResult& r, const std::vector<std::string>& class_ids) {
    std::vector<std::string> ids;
    for (std::size_t o : r.selected) ids.push_back(o < class_ids.size() ? class_ids[o] : std::to_string(o));
    return json{{"type", "selection_result"}, {"selected", r.selected}, {"selected_ids", ids},
                {"step_costs", r.step_costs}, {"energy", r.energy}, {"indicator", r.indicator}};
}

SelectionResult selection_result_from_json(const json& j) {
    SelectionResult r;
    r.selected = j.at("selected").get<std::vector<std::size_t>>();
    r.step_costs = j.at("step_costs").get<std::vector<double>>();
    r.energy = j.at("energy").get<double>();
    r.indicator = j.at("indicator").get<std::vector<std::uint8_t>>();
    return r;
}

void write_selection_report_csv(const fs::path& path, const SelectionResult& r, const SelectionProblem& problem,
                                const std::vector<std::string>& class_ids) {
    auto out = open_out(path);
    out << "rank,class_id,entropy_bits,step_cost\n";
    for (std::size_t i = 0; i < r.selected.size(); ++i) {
        const std::size_t o = r.selected[i];
        out << i + 1 << ',' << (o < class_ids.size() ? class_ids[o] : std::to_string(o)) << ','
            << format_double(problem.phi[o]) << ',' << format_double(r.step_costs[i]) << '\n';
    }
}

// -----------------------------
// networks and training
// -----------------------------
json to_json(const NetworkConfig& c) {
    return json{{"input_dim", c.input_dim},
                {"hidden", c.hidden},
                {"norm", {{"enabled", c.norm.enabled}, {"frozen", c.norm.frozen}, {"epsilon", c.norm.epsilon}}},
                {"dropout_rate", c.dropout_rate},
                {"heads", c.heads}};
}

NetworkConfig network_config_from_json(const json& j) {
    NetworkConfig c;
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    if (j.contains("norm")) {
        const auto& n = j.at("norm");
        c.norm.enabled = n.value("enabled", false);
        c.norm.frozen = n.value("frozen", true);
        c.norm.epsilon = n.value("epsilon", 1e-5);
    }
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.heads = j.at("heads").get<std::vector<std::size_t>>();
    c.validate();
    return c;
}

json to_json(const Checkpoint& c) {
    json layout = json::array();
    for (const auto& s : c.params.layout) {
        layout.push_back({{"name", s.name}, {"offset", s.offset}, {"rows", s.rows}, {"cols", s.cols}});
    }
    return json{{"type", "checkpoint"},
                {"config", to_json(c.config)},
                {"seed", c.params.seed},
                {"layout", layout},
                {"params", c.params.values},
                {"norm_stats", {{"mean", c.params.norm_mean}, {"var", c.params.norm_var}}}};
}

Checkpoint checkpoint_from_json(const json& j) {
    Checkpoint c;
    c.config = network_config_from_json(j.at("config"));
    c.params.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("layout")) {
        c.params.layout.push_back({s.at("name").get<std::string>(), s.at("offset").get<std::size_t>(),
                                   s.at("rows").get<std::size_t>(), s.at("cols").get<std::size_t>()});
    }
    c.params.values = j.at("params").get<std::vector<double>>();
    c.params.norm_mean = j.at("norm_stats").at("mean").get<std::vector<double>>();
    c.params.norm_var = j.at("norm_stats").at("var").get<std::vector<double>>();
    if (c.params.layout != build_layout(c.config)) throw Error("checkpoint layout does not match its config");
    const auto& last = c.params.layout.back();
    if (c.params.values.size() != last.offset + last.size()) throw Error("checkpoint parameter count mismatch");
    return c;
}

void write_checkpoint(const fs::path& path, const Checkpoint& c) {
    write_json(path, to_json(c));
}

Checkpoint read_checkpoint(const fs::path& path) {
    return checkpoint_from_json(read_json(path));
}

json to_json(const TransferConfig& c) {
    return json{{"mode", to_string(c.mode)},
                {"alpha", c.alpha},
                {"beta", c.beta},
                {"learning_rate", c.learning_rate},
                {"lr_decay", c.lr_decay},
                {"decay_period", c.decay_period},
                {"total_iterations", c.total_iterations()},
                {"momentum", c.momentum},
                {"batch_size", c.batch_size},
                {"dropout_rate", c.dropout_rate},
                {"seed", c.seed},
                {"soft_direction", to_string(c.soft_direction)},
                {"eval_every", c.eval_every},
                {"norm", {{"enabled", c.norm.enabled}, {"frozen", c.norm.frozen}, {"epsilon", c.norm.epsilon}}},
                {"norm_momentum", c.norm_momentum},
                {"crop", to_json(c.crop)},
                {"train_crop_sizes", c.train_crops.sizes},
                {"flip_probability", c.train_crops.flip_probability}};
}

TransferConfig transfer_config_from_json(const json& j, TransferConfig c) {
    if (j.contains("mode")) c.mode = transfer_mode_from_string(j.at("mode").get<std::string>());
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.decay_period = j.value("decay_period", c.decay_period);
    c.momentum = j.value("momentum", c.momentum);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.seed = j.value("seed", c.seed);
    if (j.contains("soft_direction")) {
        c.soft_direction = soft_direction_from_string(j.at("soft_direction").get<std::string>());
    }
    c.eval_every = j.value("eval_every", c.eval_every);
    if (j.contains("norm")) {
        const auto& n = j.at("norm");
        c.norm.enabled = n.value("enabled", c.norm.enabled);
        c.norm.frozen = n.value("frozen", c.norm.frozen);
        c.norm.epsilon = n.value("epsilon", c.norm.epsilon);
    }
    c.norm_momentum = j.value("norm_momentum", c.norm_momentum);
    if (j.contains("crop")) c.crop = crop_config_from_json(j.at("crop"), c.crop);
    c.train_crops.sizes = j.value("train_crop_sizes", c.train_crops.sizes);
    c.train_crops.flip_probability = j.value("flip_probability", c.train_crops.flip_probability);
    return c;
}

json to_json(const TrainReport& r) {
    json points = json::array();
    for (const auto& p : r.points) {
        points.push_back({{"iter", p.iteration}, {"train_loss", p.train_loss}, {"test_loss", p.test_loss},
                          {"test_acc", p.test_accuracy}, {"test_map", p.test_map}});
    }
    return json{{"type", "train_report"}, {"mode", to_string(r.mode)}, {"points", points},
                {"wall_clock_seconds", r.wall_clock_seconds}};
}

void write_curve_csv(const fs::path& path, const TrainReport& r) {
    auto out = open_out(path);
    out << "iter,train_loss,test_loss,test_acc,test_map\n";
    for (const auto& p : r.points) {
        out << p.iteration << ',' << format_double(p.train_loss) << ',' << format_double(p.test_loss) << ','
            << format_double(p.test_accuracy) << ',' << format_double(p.test_map) << '\n';
    }
}

void write_dataset_csv(const fs::path& path, const Dataset& d) {
    auto out = open_out(path);
    out << "sample_id,label";
    for (std::size_t k = 0; k < d.features.cols; ++k) out << ",f_" << k;
    out << '\n';
    for (std::size_t i = 0; i < d.size(); ++i) {
        out << i << ',' << d.labels[i];
        for (double v : d.features.row(i)) out << ',' << format_double(v);
        out << '\n';
    }
}

Dataset read_dataset_csv(const fs::path& path, std::optional<std::size_t> num_classes, Split split) {
    const auto rows = read_csv(path);
    const auto& header = rows.front();
    if (header.fields.size() < 3 || header.fields[0] != "sample_id" || header.fields[1] != "label") {
        throw Error(where(path, header.line) + ": malformed header, expected sample_id,label,f_0,...");
    }
    Dataset d;
    d.split = split;
    d.name = path.stem().string();
    const std::size_t dim = header.fields.size() - 2;
    d.features = Matrix(rows.size() - 1, dim);
    std::size_t max_label = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        check_width(path, row, dim + 2);
        const std::size_t y = parse_index(row.fields[1], where(path, row.line));
        if (num_classes && y >= *num_classes) {
            throw Error(where(path, row.line) + ": label " + std::to_string(y) + " out of range");
        }
        max_label = std::max(max_label, y);
        d.labels.push_back(y);
        auto dst = d.features.row(i - 1);
        for (std::size_t k = 0; k < dim; ++k) dst[k] = parse_double(row.fields[k + 2], where(path, row.line));
    }
    d.num_classes = num_classes ? *num_classes : max_label + 1;
    return d;
}

void write_matrix_csv(const fs::path& path, const Matrix& m, const std::string& id_column,
                      const std::string& value_prefix) {
    auto out = open_out(path);
    out << id_column;
    for (std::size_t k = 0; k < m.cols; ++k) out << ',' << value_prefix << k;
    out << '\n';
    for (std::size_t i = 0; i < m.rows; ++i) {
        out << i;
        for (double v : m.row(i)) out << ',' << format_double(v);
        out << '\n';
    }
}

Matrix read_matrix_csv(const fs::path& path) {
    const auto rows = read_csv(path);
    const std::size_t width = rows.front().fields.size();
    if (width < 2) throw Error(where(path, rows.front().line) + ": malformed header");
    Matrix m(rows.size() - 1, width - 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        check_width(path, rows[i], width);
        auto dst = m.row(i - 1);
        for (std::size_t k = 0; k + 1 < width; ++k) dst[k] = parse_double(rows[i].fields[k + 1], where(path, rows[i].line));
    }
    return m;
}

// -----------------------------
// images and inference
// -----------------------------
void write_image(const fs::path& path, const ImageBuffer& image) {
    image.validate();
    auto out = open_out(path);
    out << image.height << ' ' << image.width << ' ' << image.channels << '\n';
    for (std::size_t r = 0; r < image.height; ++r) {
        const std::size_t row_len = image.width * image.channels;
        for (std::size_t k = 0; k < row_len; ++k) {
            if (k) out << ' ';
            out << format_double(image.pixels[r * row_len + k]);
        }
        out << '\n';
    }
}

ImageBuffer read_image(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string header;
    if (!std::getline(in, header)) throw Error(where(path, 1) + ": missing 'H W C' header");
    std::istringstream hs(header);
    std::size_t h = 0, w = 0, c = 0;
    if (!(hs >> h >> w >> c) || h == 0 || w == 0 || (c != 1 && c != 3)) {
        throw Error(where(path, 1) + ": malformed header, expected 'H W C'");
    }
    ImageBuffer img(h, w, c);
    std::string line;
    std::size_t line_no = 1, filled = 0;
    const std::size_t row_len = w * c;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        std::size_t count = 0;
        while (ls >> tok) {
            if (filled >= img.pixels.size()) throw Error(where(path, line_no) + ": too many pixel values");
            img.pixels[filled++] = parse_double(tok, where(path, line_no));
            ++count;
        }
        if (count != row_len) {
            throw Error(where(path, line_no) + ": row length mismatch (expected " + std::to_string(row_len) + ")");
        }
    }
    if (filled != img.pixels.size()) throw Error(where(path, line_no) + ": truncated image data");
    img.validate();
    return img;
}

json to_json(const CropConfig& c) {
    std::vector<std::string> modes;
    for (auto m : c.ratio_modes) modes.push_back(to_string(m));
    return json{{"base_side", c.base_side}, {"crop_side", c.crop_side}, {"scale_factors", c.scale_factors},
                {"ratio_modes", modes},     {"grid", c.grid},           {"mean_pixel", c.mean_pixel}};
}

CropConfig crop_config_from_json(const json& j, CropConfig c) {
    c.base_side = j.value("base_side", c.base_side);
    c.crop_side = j.value("crop_side", c.crop_side);
    c.scale_factors = j.value("scale_factors", c.scale_factors);
    if (j.contains("ratio_modes")) {
        c.ratio_modes.clear();
        for (const auto& m : j.at("ratio_modes")) c.ratio_modes.push_back(ratio_mode_from_string(m.get<std::string>()));
    }
    c.grid = j.value("grid", c.grid);
    c.mean_pixel = j.value("mean_pixel", c.mean_pixel);
    c.validate();
    return c;
}

json to_json(const RegionSpec& s) {
    return json{{"ratio_mode", to_string(s.ratio_mode)},
                {"scale_factor", s.scale_factor},
                {"grid_row", s.grid_row},
                {"grid_col", s.grid_col},
                {"top", s.top},
                {"left", s.left},
                {"height", s.height},
                {"width", s.width},
                {"resized_height", s.resized_height},
                {"resized_width", s.resized_width}};
}

void write_scores_csv(const fs::path& path, const std::vector<std::string>& image_ids, const Matrix& scores) {
    auto out = open_out(path);
    out << "image_id";
    for (std::size_t k = 0; k < scores.cols; ++k) out << ",score_" << k;
    out << '\n';
    for (std::size_t i = 0; i < scores.rows; ++i) {
        out << image_ids.at(i);
        for (double v : scores.row(i)) out << ',' << format_double(v);
        out << '\n';
    }
}

json to_json(const GeneratorConfig& c) {
    return json{{"num_events", c.num_events},
                {"object_concepts", c.object_concepts},
                {"scene_concepts", c.scene_concepts},
                {"sparsity", c.sparsity},
                {"concentration", c.concentration},
                {"noise_sigma", c.noise_sigma},
                {"presence", c.presence},
                {"clutter", c.clutter},
                {"teacher_sharpness", c.teacher_sharpness},
                {"patterns_per_concept", c.patterns_per_concept},
                {"feature_dim", c.feature_dim},
                {"image_height", c.image_height},
                {"image_width", c.image_width},
                {"blob_side", c.blob_side},
                {"image_noise", c.image_noise},
                {"train_count", c.train_count},
                {"test_count", c.test_count},
                {"aux_count", c.aux_count},
                {"seed", c.seed}};
}

GeneratorConfig generator_config_from_json(const json& j, GeneratorConfig c) {
    c.num_events = j.value("num_events", c.num_events);
    c.object_concepts = j.value("object_concepts", c.object_concepts);
    c.scene_concepts = j.value("scene_concepts", c.scene_concepts);
    c.sparsity = j.value("sparsity", c.sparsity);
    c.concentration = j.value("concentration", c.concentration);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.presence = j.value("presence", c.presence);
    c.clutter = j.value("clutter", c.clutter);
    c.teacher_sharpness = j.value("teacher_sharpness", c.teacher_sharpness);
    c.patterns_per_concept = j.value("patterns_per_concept", c.patterns_per_concept);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.image_height = j.value("image_height", c.image_height);
    c.image_width = j.value("image_width", c.image_width);
    c.blob_side = j.value("blob_side", c.blob_side);
    c.image_noise = j.value("image_noise", c.image_noise);
    c.train_count = j.value("train_count", c.train_count);
    c.test_count = j.value("test_count", c.test_count);
    c.aux_count = j.value("aux_count", c.aux_count);
    c.seed = j.value("seed", c.seed);
    return c;
}

json to_json(const PlantedTruth& t) {
    return json{{"object_signatures", t.object_signatures},
                {"scene_signatures", t.scene_signatures},
                {"blob_levels", t.blob_levels},
                {"mixing", matrix_json(t.mixing)}};
}

}  // namespace os2e::io
