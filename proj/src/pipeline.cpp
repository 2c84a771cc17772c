#include "bcih/pipeline.hpp"

#include <cmath>
#include <string>

#include "bcih/errors.hpp"

namespace bcih {

namespace {

struct ClassStream {
    std::vector<Eigen::MatrixXd> bands;  // per band, channels x n
    std::vector<Eigen::Index> starts;
};

ClassStream filter_class(std::span<const EegBlock> blocks, const CalibrationOptions& opt, const char* name) {
    const double fs = opt.filter_bank.sample_rate;
    Eigen::Index total = 0;
    for (const auto& b : blocks) {
        if (b.samples.rows() != kNumChannels) throw CalibrationError(std::string(name) + " stream: wrong channel count");
        if (b.layout && b.layout->sample_rate != fs)
            throw CalibrationError(std::string(name) + " stream: sample rate mismatch");
        total += b.samples.cols();
    }
    const double seconds = static_cast<double>(total) / fs;
    if (seconds + 1e-9 < opt.min_seconds)
        throw CalibrationError(std::string(name) + " stream has " + std::to_string(seconds) + " s of data, " +
                               std::to_string(opt.min_seconds) + " s required (short by " +
                               std::to_string(opt.min_seconds - seconds) + " s)");

    FilterBank bank(opt.filter_bank, kNumChannels);
    ClassStream cs;
    cs.bands.assign(bank.n_bands(), Eigen::MatrixXd(kNumChannels, total));
    Eigen::Index offset = 0;
    for (const auto& b : blocks) {
        auto filtered = bank.apply(b.samples);
        for (std::size_t k = 0; k < filtered.size(); ++k) cs.bands[k].middleCols(offset, b.samples.cols()) = filtered[k];
        offset += b.samples.cols();
    }
    cs.starts = opt.window.starts(total, fs);
    return cs;
}

}  // namespace

void PipelineModel::validate() const {
    if (version != kModelFormatVersion) throw ConfigError("unsupported model version " + std::to_string(version));
    if (csp.size() != filter_bank.bands.size()) throw ConfigError("model: one CSP entry per band is required");
    for (const auto& b : csp)
        if (b.filters.cols() != n_channels || b.filters.rows() != b.eigenvalues.size())
            throw ConfigError("model: CSP filter dimensions are inconsistent");
    if (selected.empty() || static_cast<Eigen::Index>(selected.size()) != lda.weights.size())
        throw ConfigError("model: LDA weight count does not match selected features");
    for (const auto& c : selected)
        if (c.band < 0 || c.band >= static_cast<int>(csp.size()) || c.filter < 0 ||
            c.filter >= csp[static_cast<std::size_t>(c.band)].filters.rows())
            throw ConfigError("model: selected couple out of range");
    window.validate(filter_bank.sample_rate);
}

Eigen::VectorXd PipelineModel::features(const std::vector<Eigen::MatrixXd>& window_bands) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(selected.size()));
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const auto& c = selected[i];
        const auto& band = csp[static_cast<std::size_t>(c.band)];
        x(static_cast<Eigen::Index>(i)) =
            csp_feature(window_bands[static_cast<std::size_t>(c.band)], band.filters.row(c.filter));
    }
    return x;
}

json to_json(const PipelineModel& m) {
    json bands = json::array();
    for (const auto& b : m.filter_bank.bands) bands.push_back({{"center", b.center}, {"bandwidth", b.bandwidth}});
    json csp = json::array();
    for (const auto& c : m.csp) {
        json ev = json::array();
        for (Eigen::Index i = 0; i < c.eigenvalues.size(); ++i) ev.push_back(c.eigenvalues(i));
        csp.push_back({{"filters", matrix_to_json(c.filters)}, {"eigenvalues", std::move(ev)}});
    }
    json sel = json::array();
    for (const auto& s : m.selected) sel.push_back({{"band", s.band}, {"filter", s.filter}, {"id", s.id()}});
    json w = json::array();
    for (Eigen::Index i = 0; i < m.lda.weights.size(); ++i) w.push_back(m.lda.weights(i));
    return {{"format", "bcih-pipeline-model"},
            {"version", m.version},
            {"n_channels", m.n_channels},
            {"filter_bank",
             {{"bands", std::move(bands)}, {"order", m.filter_bank.order}, {"sample_rate", m.filter_bank.sample_rate}}},
            {"window", {{"length", m.window.length}, {"overlap", m.window.overlap}}},
            {"csp", std::move(csp)},
            {"selected", std::move(sel)},
            {"lda", {{"weights", std::move(w)}, {"bias", m.lda.bias}, {"gamma", m.lda.gamma}}}};
}

PipelineModel pipeline_model_from_json(const json& j) {
    if (!j.contains("version")) throw ConfigError("model JSON is missing the version field");
    PipelineModel m;
    m.version = j.at("version").get<int>();
    if (m.version != kModelFormatVersion) throw ConfigError("unsupported model version " + std::to_string(m.version));
    m.n_channels = j.at("n_channels").get<int>();
    const auto& fb = j.at("filter_bank");
    m.filter_bank.bands.clear();
    for (const auto& b : fb.at("bands"))
        m.filter_bank.bands.push_back({b.at("center").get<double>(), b.at("bandwidth").get<double>()});
    m.filter_bank.order = fb.at("order").get<int>();
    m.filter_bank.sample_rate = fb.at("sample_rate").get<double>();
    m.window.length = j.at("window").at("length").get<double>();
    m.window.overlap = j.at("window").at("overlap").get<double>();
    for (const auto& c : j.at("csp")) {
        CspBand band;
        band.filters = matrix_from_json(c.at("filters"));
        const auto& ev = c.at("eigenvalues");
        band.eigenvalues.resize(static_cast<Eigen::Index>(ev.size()));
        for (std::size_t i = 0; i < ev.size(); ++i) band.eigenvalues(static_cast<Eigen::Index>(i)) = ev[i].get<double>();
        m.csp.push_back(std::move(band));
    }
    for (const auto& s : j.at("selected")) m.selected.push_back({s.at("band").get<int>(), s.at("filter").get<int>()});
    const auto& lda = j.at("lda");
    const auto& w = lda.at("weights");
    m.lda.weights.resize(static_cast<Eigen::Index>(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i) m.lda.weights(static_cast<Eigen::Index>(i)) = w[i].get<double>();
    m.lda.bias = lda.at("bias").get<double>();
    m.lda.gamma = lda.at("gamma").get<double>();
    m.validate();
    return m;
}

std::string model_hash(const PipelineModel& m) { return json_hash(to_json(m)); }

json to_json(const CalibrationDiagnostics& d) {
    return {{"windows_low", d.windows_low}, {"windows_high", d.windows_high}, {"training_accuracy", d.training_accuracy}};
}

CalibrationResult calibrate_pipeline(std::span<const EegBlock> low, std::span<const EegBlock> high,
                                     const CalibrationOptions& opt) {
    const double fs = opt.filter_bank.sample_rate;
    opt.window.validate(fs);
    const ClassStream lo = filter_class(low, opt, "low-workload");
    const ClassStream hi = filter_class(high, opt, "high-workload");
    const Eigen::Index len = opt.window.length_samples(fs);
    const std::size_t n_bands = lo.bands.size();

    PipelineModel model;
    model.filter_bank = opt.filter_bank;
    model.window = opt.window;
    model.n_channels = kNumChannels;
    for (std::size_t b = 0; b < n_bands; ++b) {
        const auto cov_lo = estimate_covariance(lo.bands[b], lo.starts, len, opt.covariance_shrinkage);
        const auto cov_hi = estimate_covariance(hi.bands[b], hi.starts, len, opt.covariance_shrinkage);
        model.csp.push_back(train_csp(cov_lo, cov_hi, opt.csp_pairs));
    }

    const auto n_lo = static_cast<Eigen::Index>(lo.starts.size());
    const auto n_hi = static_cast<Eigen::Index>(hi.starts.size());
    const Eigen::Index per_band = 2 * opt.csp_pairs;
    Eigen::MatrixXd table(n_lo + n_hi, static_cast<Eigen::Index>(n_bands) * per_band);
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(n_lo + n_hi));
    auto fill = [&](const ClassStream& cs, Eigen::Index row0, int label) {
        for (std::size_t w = 0; w < cs.starts.size(); ++w) {
            for (std::size_t b = 0; b < n_bands; ++b) {
                table.block(row0 + static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(b) * per_band, 1, per_band) =
                    csp_features(cs.bands[b].middleCols(cs.starts[w], len), model.csp[b].filters).transpose();
            }
            labels.push_back(label);
        }
    };
    fill(lo, 0, -1);
    fill(hi, n_lo, +1);

    if (per_band != FeatureCouple::kFiltersPerBand)
        throw CalibrationError("feature couples assume 3 CSP pairs per band");
    model.selected = mrmr_select(table, labels, opt.n_selected);

    Eigen::MatrixXd chosen(table.rows(), static_cast<Eigen::Index>(model.selected.size()));
    for (std::size_t i = 0; i < model.selected.size(); ++i)
        chosen.col(static_cast<Eigen::Index>(i)) = table.col(model.selected[i].id());
    model.lda = train_lda(chosen, labels, opt.lda_gamma);
    model.validate();

    std::size_t correct = 0;
    for (Eigen::Index r = 0; r < chosen.rows(); ++r)
        if (model.lda.classify(chosen.row(r).transpose()) == labels[static_cast<std::size_t>(r)]) ++correct;

    CalibrationResult result{std::move(model), {}};
    result.diagnostics.windows_low = lo.starts.size();
    result.diagnostics.windows_high = hi.starts.size();
    result.diagnostics.training_accuracy = static_cast<double>(correct) / static_cast<double>(chosen.rows());
    return result;
}

StreamClassifier::StreamClassifier(std::shared_ptr<const PipelineModel> model, double start_time)
    : model_(model ? std::move(model) : throw UsageError("stream classifier requires a calibrated model")),
      bank_(model_->filter_bank, model_->n_channels),
      windower_(model_->window, model_->filter_bank.sample_rate, model_->filter_bank.bands.size(), model_->n_channels,
                start_time) {}

std::vector<RawLabel> StreamClassifier::push(const EegBlock& block) {
    if (block.layout && block.layout->sample_rate != model_->filter_bank.sample_rate)
        throw InputError("stream sample rate does not match the calibrated model");
    return push(block.samples);
}

std::vector<RawLabel> StreamClassifier::push(const Eigen::MatrixXd& samples) {
    std::vector<RawLabel> labels;
    for (const auto& w : windower_.push(bank_.apply(samples))) {
        const Eigen::VectorXd x = model_->features(w.bands);
        const double d = model_->lda.discriminant(x);
        labels.push_back({w.end_time, d >= 0.0 ? 1 : -1, d});
    }
    return labels;
}

std::vector<RawLabel> stream_classify(const PipelineModel& model, std::span<const EegBlock> stream) {
    StreamClassifier sc(std::make_shared<const PipelineModel>(model), stream.empty() ? 0.0 : stream.front().start_time);
    std::vector<RawLabel> out;
    for (const auto& b : stream) {
        auto l = sc.push(b);
        out.insert(out.end(), l.begin(), l.end());
    }
    return out;
}

WorkloadEstimator::WorkloadEstimator(std::shared_ptr<const PipelineModel> model) : classifier_(std::move(model)) {}

WorkloadEstimator::Update WorkloadEstimator::push(const EegBlock& block) {
    Update u;
    u.labels = classifier_.push(block);
    for (const auto& l : u.labels)
        if (auto idx = smoother_.push(l.label, l.time)) u.index = idx;
    return u;
}

}  // namespace bcih
