#include "trajlab/models.hpp"

#include <algorithm>
#include <cmath>

#include "trajlab/errors.hpp"
#include "trajlab/ops.hpp"

namespace trajlab {

namespace {

constexpr std::size_t kPrecomputedSteps = 256;

/// Sinusoidal time stamps, precomputed for the first few hundred steps.
class TimeStamps {
   public:
    explicit TimeStamps(std::size_t dim) : dim_(dim) {
        table_.reserve(kPrecomputedSteps * dim);
        for (std::size_t t = 0; t < kPrecomputedSteps; ++t) {
            auto row = positional_encoding(t, dim);
            table_.insert(table_.end(), row.begin(), row.end());
        }
    }

    /// Rows for `batch` copies of times [first, first + count).
    Tensor rows(std::size_t batch, std::size_t first, std::size_t count) const {
        std::vector<double> values;
        values.reserve(batch * count * dim_);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t t = first; t < first + count; ++t) {
                if (t < kPrecomputedSteps) {
                    values.insert(values.end(), table_.begin() + static_cast<std::ptrdiff_t>(t * dim_),
                                  table_.begin() + static_cast<std::ptrdiff_t>((t + 1) * dim_));
                } else {
                    auto row = positional_encoding(t, dim_);
                    values.insert(values.end(), row.begin(), row.end());
                }
            }
        return Tensor::matrix(batch * count, dim_, std::move(values));
    }

   private:
    std::size_t dim_;
    std::vector<double> table_;
};

/// Lifts 2-D step values (linear projection) or class indices (lookup) to d_model.
class StepEncoder {
   public:
    StepEncoder(const ModelConfig& c, std::mt19937_64& rng) : quantized_(c.head == HeadKind::quantized) {
        if (quantized_)
            table_ = Embedding(c.num_classes, c.d_model, rng);
        else
            proj_ = Linear(2, c.d_model, rng);
    }

    Tensor operator()(std::span<const Vec2> values, std::span<const std::size_t> classes) const {
        if (quantized_) return table_(classes);
        std::vector<double> flat;
        flat.reserve(values.size() * 2);
        for (const auto& v : values) {
            flat.push_back(v.x);
            flat.push_back(v.y);
        }
        return proj_(Tensor::matrix(values.size(), 2, std::move(flat)));
    }

    void collect(const std::string& prefix, ParameterList& out) const {
        if (quantized_)
            table_.collect(prefix, out);
        else
            proj_.collect(prefix, out);
    }

    static std::size_t parameter_count(const ModelConfig& c) {
        return c.head == HeadKind::quantized ? c.num_classes * c.d_model : 3 * c.d_model;
    }

   private:
    bool quantized_;
    Linear proj_;
    Embedding table_;
};

Tensor learned_vector(std::size_t dim, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(dim);
    for (double& x : v) x = dist(rng);
    return Tensor({1, dim}, std::move(v), true);
}

std::vector<AttentionMask> key_masks(const PreparedBatch& b, std::size_t queries) {
    if (b.all_valid()) return {AttentionMask::full(queries, b.obs_len)};
    std::vector<AttentionMask> masks;
    masks.reserve(b.batch);
    std::vector<bool> valid(b.obs_len);
    for (std::size_t i = 0; i < b.batch; ++i) {
        for (std::size_t t = 0; t < b.obs_len; ++t) valid[t] = b.obs_valid[i * b.obs_len + t];
        masks.push_back(AttentionMask::key_padding(queries, valid));
    }
    return masks;
}

// Head rows for one step: row (b * len + step) for every b.
Tensor step_rows(const Tensor& x, std::size_t batch, std::size_t len, std::size_t step) {
    std::vector<std::size_t> idx(batch);
    for (std::size_t b = 0; b < batch; ++b) idx[b] = b * len + step;
    return ops::gather_rows(x, idx);
}

std::size_t linear_count(std::size_t in, std::size_t out, bool bias = true) { return in * out + (bias ? out : 0); }

std::size_t attention_count(std::size_t d) { return 4 * linear_count(d, d); }

std::size_t ff_count(const ModelConfig& c) {
    const std::size_t inner = c.ff_multiplier * c.d_model;
    return linear_count(c.d_model, inner) + linear_count(inner, c.d_model);
}

std::size_t encoder_layer_count(const ModelConfig& c) { return attention_count(c.d_model) + ff_count(c) + 4 * c.d_model; }

std::size_t decoder_layer_count(const ModelConfig& c) {
    return 2 * attention_count(c.d_model) + ff_count(c) + 6 * c.d_model;
}

// --- Transformer (encoder-decoder) -----------------------------------------

class TransformerNetwork final : public Network {
   public:
    explicit TransformerNetwork(const ModelConfig& c, std::mt19937_64& rng)
        : cfg_(c), enc_in_(c, rng), dec_in_(c, rng), start_(learned_vector(c.d_model, rng)), time_(c.d_model) {
        const std::size_t inner = c.ff_multiplier * c.d_model;
        for (std::size_t i = 0; i < c.layers; ++i) encoder_.emplace_back(c.d_model, c.heads, inner, rng);
        for (std::size_t i = 0; i < c.layers; ++i) decoder_.emplace_back(c.d_model, c.heads, inner, rng);
        head_ = Linear(c.d_model, c.head_width(), rng);
    }

    TrainOutputs training_outputs(const PreparedBatch& b, const DropoutContext& dropout, std::mt19937_64&) const override {
        Tensor memory = encode(b, dropout);
        std::vector<Vec2> values;
        std::vector<std::size_t> classes;
        for (std::size_t i = 0; i < b.batch; ++i)
            for (std::size_t j = 0; j + 1 < b.pred_len; ++j) {
                values.push_back(b.future_values[i * b.pred_len + j]);
                classes.push_back(b.future_classes.empty() ? 0 : b.future_classes[i * b.pred_len + j]);
            }
        Tensor x = decode_rows(b, memory, values, classes, b.pred_len, dropout);
        TrainOutputs out{head_(x), {}};
        out.target_index.resize(b.batch * b.pred_len);
        for (std::size_t i = 0; i < out.target_index.size(); ++i) out.target_index[i] = i;
        return out;
    }

    void decode(const PreparedBatch& b, std::size_t pred_len, bool oracle, const StepChooser& choose) const override {
        if (oracle) throw ModelError("oracle endpoint decoding requires a bert_os model");
        const DropoutContext off;
        Tensor memory = encode(b, off);
        // fed[i] holds the inputs of element i for steps 0..j-1, stored batch-major below.
        std::vector<std::vector<StepInput>> fed(b.batch);
        std::vector<StepInput> chosen(b.batch);
        for (std::size_t j = 0; j < pred_len; ++j) {
            const std::size_t len = j + 1;
            std::vector<Vec2> values;
            std::vector<std::size_t> classes;
            for (std::size_t i = 0; i < b.batch; ++i)
                for (const auto& s : fed[i]) {
                    values.push_back(s.value);
                    classes.push_back(s.cls);
                }
            Tensor x = decode_rows(b, memory, values, classes, len, off);
            choose(j, head_(step_rows(x, b.batch, len, j)), chosen);
            for (std::size_t i = 0; i < b.batch; ++i) fed[i].push_back(chosen[i]);
        }
    }

    void collect(ParameterList& out) const override {
        enc_in_.collect("encoder_input", out);
        dec_in_.collect("decoder_input", out);
        out.push_back({"decoder_start", start_});
        for (std::size_t i = 0; i < encoder_.size(); ++i) encoder_[i].collect("encoder." + std::to_string(i), out);
        for (std::size_t i = 0; i < decoder_.size(); ++i) decoder_[i].collect("decoder." + std::to_string(i), out);
        head_.collect("head", out);
    }

    static std::size_t parameter_count(const ModelConfig& c) {
        return 2 * StepEncoder::parameter_count(c) + c.d_model + c.layers * encoder_layer_count(c) +
               c.layers * decoder_layer_count(c) + linear_count(c.d_model, c.head_width());
    }

   private:
    Tensor encode(const PreparedBatch& b, const DropoutContext& dropout) const {
        if (b.obs_len == 0) throw ModelError("empty observation");
        Tensor x = ops::add(enc_in_(b.obs_values, b.obs_classes), time_.rows(b.batch, 0, b.obs_len));
        x = dropout.apply(x);
        const auto masks = key_masks(b, b.obs_len);
        for (const auto& layer : encoder_) x = layer(x, b.batch, masks, dropout);
        return x;
    }

    // Decoder over `len` positions per element: position 0 is the learned start
    // token, position i > 0 carries the (i-1)-th fed value. `values` holds len-1
    // entries per element, batch-major.
    Tensor decode_rows(const PreparedBatch& b, const Tensor& memory, std::span<const Vec2> values,
                       std::span<const std::size_t> classes, std::size_t len, const DropoutContext& dropout) const {
        Tensor inputs = start_;
        std::vector<std::size_t> idx(b.batch * len, 0);
        if (len > 1) {
            const Tensor parts[] = {start_, dec_in_(values, classes)};
            inputs = ops::concat_rows(parts);
            for (std::size_t i = 0; i < b.batch; ++i)
                for (std::size_t p = 1; p < len; ++p) idx[i * len + p] = 1 + i * (len - 1) + (p - 1);
        }
        Tensor x = ops::add(ops::gather_rows(inputs, idx), time_.rows(b.batch, b.obs_len, len));
        x = dropout.apply(x);
        const AttentionMask causal = AttentionMask::causal(len);
        const auto cross = key_masks(b, len);
        for (const auto& layer : decoder_)
            x = layer(x, memory, b.batch, std::span<const AttentionMask>(&causal, 1), cross, dropout);
        return x;
    }

    ModelConfig cfg_;
    StepEncoder enc_in_, dec_in_;
    Tensor start_;
    std::vector<EncoderLayer> encoder_;
    std::vector<DecoderLayer> decoder_;
    Linear head_;
    TimeStamps time_;
};

// --- BERT (encoder only, masked positions) ---------------------------------

class BertNetwork final : public Network {
   public:
    explicit BertNetwork(const ModelConfig& c, std::mt19937_64& rng)
        : cfg_(c), input_(c, rng), mask_token_(learned_vector(c.d_model, rng)), time_(c.d_model) {
        const std::size_t inner = c.ff_multiplier * c.d_model;
        for (std::size_t i = 0; i < c.layers; ++i) layers_.emplace_back(c.d_model, c.heads, inner, rng);
        head_ = Linear(c.d_model, c.head_width(), rng);
    }

    TrainOutputs training_outputs(const PreparedBatch& b, const DropoutContext& dropout,
                                  std::mt19937_64& rng) const override {
        const std::size_t seq = b.obs_len + b.pred_len;
        Layout layout(b, seq);
        TrainOutputs out;
        std::vector<std::size_t> rows;
        if (cfg_.architecture == Architecture::bert_os) {
            for (std::size_t i = 0; i < b.batch; ++i) {
                if (cfg_.oracle_endpoint) layout.set_future_value(b, i, b.pred_len - 1);
                for (std::size_t j = 0; j < b.pred_len; ++j) {
                    rows.push_back(i * seq + b.obs_len + j);
                    out.target_index.push_back(i * b.pred_len + j);
                }
            }
        } else {
            // One target step per element; later steps are hidden from attention.
            std::uniform_int_distribution<std::size_t> pick(0, b.pred_len - 1);
            for (std::size_t i = 0; i < b.batch; ++i) {
                const std::size_t t = pick(rng);
                for (std::size_t j = 0; j < t; ++j) layout.set_future_value(b, i, j);
                for (std::size_t j = t + 1; j < b.pred_len; ++j) layout.key_valid[i * seq + b.obs_len + j] = false;
                rows.push_back(i * seq + b.obs_len + t);
                out.target_index.push_back(i * b.pred_len + t);
            }
        }
        Tensor x = run(layout, b.batch, seq, dropout);
        out.head_out = head_(ops::gather_rows(x, rows));
        return out;
    }

    void decode(const PreparedBatch& b, std::size_t pred_len, bool oracle, const StepChooser& choose) const override {
        const DropoutContext off;
        std::vector<StepInput> chosen(b.batch);
        if (cfg_.architecture == Architecture::bert_os) {
            const std::size_t seq = b.obs_len + pred_len;
            Layout layout(b, seq);
            if (oracle) {
                if (b.future_values.empty() || b.pred_len < pred_len)
                    throw ModelError("oracle decoding needs the true endpoint of every window");
                for (std::size_t i = 0; i < b.batch; ++i) {
                    const std::size_t src = i * b.pred_len + pred_len - 1;
                    layout.set_slot(i * seq + seq - 1, b.future_values[src],
                                    b.future_classes.empty() ? 0 : b.future_classes[src]);
                }
            }
            Tensor x = run(layout, b.batch, seq, off);
            Tensor out = head_(x);
            for (std::size_t j = 0; j < pred_len; ++j) choose(j, step_rows(out, b.batch, seq, b.obs_len + j), chosen);
            return;
        }
        if (oracle) throw ModelError("oracle endpoint decoding requires a bert_os model");
        std::vector<std::vector<StepInput>> fed(b.batch);
        for (std::size_t j = 0; j < pred_len; ++j) {
            const std::size_t seq = b.obs_len + j + 1;
            Layout layout(b, seq);
            for (std::size_t i = 0; i < b.batch; ++i)
                for (std::size_t p = 0; p < j; ++p) layout.set_slot(i * seq + b.obs_len + p, fed[i][p].value, fed[i][p].cls);
            Tensor x = run(layout, b.batch, seq, off);
            choose(j, head_(step_rows(x, b.batch, seq, b.obs_len + j)), chosen);
            for (std::size_t i = 0; i < b.batch; ++i) fed[i].push_back(chosen[i]);
        }
    }

    void collect(ParameterList& out) const override {
        input_.collect("input", out);
        out.push_back({"mask_token", mask_token_});
        for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect("encoder." + std::to_string(i), out);
        head_.collect("head", out);
    }

    static std::size_t parameter_count(const ModelConfig& c) {
        return StepEncoder::parameter_count(c) + c.d_model + c.layers * encoder_layer_count(c) +
               linear_count(c.d_model, c.head_width());
    }

   private:
    // Per-slot input description: observed slots carry values, future slots are
    // MASK unless a value is set.
    struct Layout {
        Layout(const PreparedBatch& b, std::size_t seq)
            : is_value(b.batch * seq, false), values(b.batch * seq), classes(b.batch * seq, 0), key_valid(b.batch * seq, true) {
            for (std::size_t i = 0; i < b.batch; ++i)
                for (std::size_t t = 0; t < b.obs_len; ++t) {
                    const std::size_t slot = i * seq + t;
                    is_value[slot] = true;
                    values[slot] = b.obs_values[i * b.obs_len + t];
                    classes[slot] = b.obs_classes.empty() ? 0 : b.obs_classes[i * b.obs_len + t];
                    key_valid[slot] = b.obs_valid[i * b.obs_len + t];
                }
            seq_ = seq;
        }
        void set_slot(std::size_t slot, const Vec2& v, std::size_t cls) {
            is_value[slot] = true;
            values[slot] = v;
            classes[slot] = cls;
        }
        void set_future_value(const PreparedBatch& b, std::size_t i, std::size_t j) {
            set_slot(i * seq_ + b.obs_len + j, b.future_values[i * b.pred_len + j],
                     b.future_classes.empty() ? 0 : b.future_classes[i * b.pred_len + j]);
        }
        std::vector<bool> is_value;
        std::vector<Vec2> values;
        std::vector<std::size_t> classes;
        std::vector<bool> key_valid;
        std::size_t seq_ = 0;
    };

    Tensor run(const Layout& layout, std::size_t batch, std::size_t seq, const DropoutContext& dropout) const {
        std::vector<Vec2> values;
        std::vector<std::size_t> classes;
        std::vector<std::size_t> idx(batch * seq, 0);
        for (std::size_t s = 0; s < batch * seq; ++s)
            if (layout.is_value[s]) {
                idx[s] = 1 + values.size();
                values.push_back(layout.values[s]);
                classes.push_back(layout.classes[s]);
            }
        Tensor inputs = mask_token_;
        if (!values.empty()) {
            const Tensor parts[] = {mask_token_, input_(values, classes)};
            inputs = ops::concat_rows(parts);
        }
        Tensor x = ops::add(ops::gather_rows(inputs, idx), time_.rows(batch, 0, seq));
        x = dropout.apply(x);

        std::vector<AttentionMask> masks;
        const bool all_keys = std::all_of(layout.key_valid.begin(), layout.key_valid.end(), [](bool v) { return v; });
        if (all_keys) {
            masks.push_back(AttentionMask::full(seq, seq));
        } else {
            std::vector<bool> valid(seq);
            for (std::size_t i = 0; i < batch; ++i) {
                for (std::size_t t = 0; t < seq; ++t) valid[t] = layout.key_valid[i * seq + t];
                masks.push_back(AttentionMask::key_padding(seq, valid));
            }
        }
        for (const auto& layer : layers_) x = layer(x, batch, masks, dropout);
        return x;
    }

    ModelConfig cfg_;
    StepEncoder input_;
    Tensor mask_token_;
    std::vector<EncoderLayer> layers_;
    Linear head_;
    TimeStamps time_;
};

// --- LSTM ------------------------------------------------------------------

class LstmNetwork final : public Network {
   public:
    explicit LstmNetwork(const ModelConfig& c, std::mt19937_64& rng)
        : cfg_(c), input_(c, rng), zero_row_(Tensor::zeros({1, c.d_model})) {
        for (std::size_t i = 0; i < c.layers; ++i) cells_.emplace_back(c.d_model, c.d_model, rng);
        head_ = Linear(c.d_model, c.head_width(), rng);
    }

    TrainOutputs training_outputs(const PreparedBatch& b, const DropoutContext& dropout, std::mt19937_64&) const override {
        // Inputs: observed steps then teacher-forced futures 0..pred_len-2.
        const std::size_t steps = b.obs_len + b.pred_len - 1;
        std::vector<Vec2> values;
        std::vector<std::size_t> classes;
        std::vector<std::size_t> idx(b.batch * steps, 0);
        for (std::size_t i = 0; i < b.batch; ++i)
            for (std::size_t s = 0; s < steps; ++s) {
                const bool observed = s < b.obs_len;
                if (observed && !b.obs_valid[i * b.obs_len + s]) continue;
                const std::size_t src = observed ? i * b.obs_len + s : i * b.pred_len + (s - b.obs_len);
                idx[i * steps + s] = 1 + values.size();
                values.push_back(observed ? b.obs_values[src] : b.future_values[src]);
                const auto& cls = observed ? b.obs_classes : b.future_classes;
                classes.push_back(cls.empty() ? 0 : cls[src]);
            }
        const Tensor parts[] = {zero_row_, input_(values, classes)};
        const Tensor table = ops::concat_rows(parts);

        auto states = initial(b.batch);
        std::vector<Tensor> outputs;
        std::vector<std::size_t> step_idx(b.batch);
        for (std::size_t s = 0; s < steps; ++s) {
            for (std::size_t i = 0; i < b.batch; ++i) step_idx[i] = idx[i * steps + s];
            Tensor top = advance(states, dropout.apply(ops::gather_rows(table, step_idx)), dropout);
            if (s + 1 >= b.obs_len) outputs.push_back(head_(dropout.apply(top)));
        }
        TrainOutputs out{ops::concat_rows(outputs), {}};
        for (std::size_t j = 0; j < b.pred_len; ++j)
            for (std::size_t i = 0; i < b.batch; ++i) out.target_index.push_back(i * b.pred_len + j);
        return out;
    }

    void decode(const PreparedBatch& b, std::size_t pred_len, bool oracle, const StepChooser& choose) const override {
        if (oracle) throw ModelError("oracle endpoint decoding requires a bert_os model");
        const DropoutContext off;
        auto states = initial(b.batch);
        Tensor top;
        std::vector<Vec2> values(b.batch);
        std::vector<std::size_t> classes(b.batch);
        std::vector<std::size_t> idx(b.batch);
        for (std::size_t s = 0; s < b.obs_len; ++s) {
            for (std::size_t i = 0; i < b.batch; ++i) {
                values[i] = b.obs_values[i * b.obs_len + s];
                classes[i] = b.obs_classes.empty() ? 0 : b.obs_classes[i * b.obs_len + s];
                idx[i] = b.obs_valid[i * b.obs_len + s] ? 1 + i : 0;
            }
            const Tensor parts[] = {zero_row_, input_(values, classes)};
            top = advance(states, ops::gather_rows(ops::concat_rows(parts), idx), off);
        }
        std::vector<StepInput> chosen(b.batch);
        for (std::size_t j = 0; j < pred_len; ++j) {
            choose(j, head_(top), chosen);
            if (j + 1 == pred_len) break;
            for (std::size_t i = 0; i < b.batch; ++i) {
                values[i] = chosen[i].value;
                classes[i] = chosen[i].cls;
            }
            top = advance(states, input_(values, classes), off);
        }
    }

    void collect(ParameterList& out) const override {
        input_.collect("input", out);
        for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i].collect("lstm." + std::to_string(i), out);
        head_.collect("head", out);
    }

    static std::size_t parameter_count(const ModelConfig& c) {
        const std::size_t d = c.d_model;
        return StepEncoder::parameter_count(c) + c.layers * (linear_count(d, 4 * d) + linear_count(d, 4 * d, false)) +
               linear_count(d, c.head_width());
    }

   private:
    std::vector<LstmState> initial(std::size_t batch) const {
        std::vector<LstmState> states;
        for (const auto& cell : cells_) states.push_back(cell.zero_state(batch));
        return states;
    }

    Tensor advance(std::vector<LstmState>& states, Tensor x, const DropoutContext& dropout) const {
        for (std::size_t l = 0; l < cells_.size(); ++l) {
            if (l > 0) x = dropout.apply(x);
            states[l] = cells_[l](x, states[l]);
            x = states[l].h;
        }
        return x;
    }

    ModelConfig cfg_;
    StepEncoder input_;
    Tensor zero_row_;
    std::vector<LstmCell> cells_;
    Linear head_;
};

}  // namespace

GaussianParams GaussianParams::from_raw(std::span<const double> raw) {
    if (raw.size() != 5) throw ShapeError("gaussian head expects 5 raw outputs");
    return {{raw[0], raw[1]}, {std::exp(raw[2]), std::exp(raw[3])}, std::tanh(raw[4])};
}

std::array<double, 4> GaussianParams::covariance() const {
    const double c = rho * sigma.x * sigma.y;
    return {sigma.x * sigma.x, c, c, sigma.y * sigma.y};
}

Vec2 GaussianParams::sample(std::mt19937_64& rng) const {
    std::normal_distribution<double> n(0.0, 1.0);
    const double z1 = n(rng), z2 = n(rng);
    // Cholesky of [[sx^2, r sx sy], [r sx sy, sy^2]].
    const double l11 = sigma.x, l21 = rho * sigma.y, l22 = sigma.y * std::sqrt(std::max(0.0, 1.0 - rho * rho));
    return {mu.x + l11 * z1, mu.y + l21 * z1 + l22 * z2};
}

bool PreparedBatch::all_valid() const {
    return std::all_of(obs_valid.begin(), obs_valid.end(), [](bool v) { return v; });
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    // splitmix64 finaliser over the combined words.
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::unique_ptr<Network> make_network(const ModelConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    switch (config.architecture) {
        case Architecture::tf:
            return std::make_unique<TransformerNetwork>(config, rng);
        case Architecture::bert_ar:
        case Architecture::bert_os:
            return std::make_unique<BertNetwork>(config, rng);
        case Architecture::lstm:
            return std::make_unique<LstmNetwork>(config, rng);
    }
    throw ConfigError("unknown architecture");
}

std::size_t count_parameters(const ModelConfig& config) {
    config.validate();
    switch (config.architecture) {
        case Architecture::tf:
            return TransformerNetwork::parameter_count(config);
        case Architecture::bert_ar:
        case Architecture::bert_os:
            return BertNetwork::parameter_count(config);
        case Architecture::lstm:
            return LstmNetwork::parameter_count(config);
    }
    return 0;
}

ForecastModel::ForecastModel(ModelConfig config, NormStats stats, std::optional<MotionCodebook> codebook)
    : config_(std::move(config)), stats_(stats), codebook_(std::move(codebook)) {
    config_.validate();
    if (config_.head == HeadKind::quantized) {
        if (!codebook_) throw ConfigError("the quantized head needs a fitted motion codebook");
        if (codebook_->size() != config_.num_classes)
            throw ConfigError("codebook has " + std::to_string(codebook_->size()) + " classes but config asks for " +
                              std::to_string(config_.num_classes));
    }
    net_ = make_network(config_);
}

ParameterList ForecastModel::parameters() const {
    ParameterList out;
    net_->collect(out);
    return out;
}

PreparedBatch ForecastModel::prepare(std::span<const TrackWindow> windows, bool with_future) const {
    PreparedBatch b;
    b.batch = windows.size();
    if (windows.empty()) return b;
    b.obs_len = windows.front().obs_len();
    b.pred_len = windows.front().pred_len();
    const bool quantized = config_.head == HeadKind::quantized;
    const bool feedback = quantized && config_.error_feedback && config_.representation == Representation::speeds;
    for (const auto& w : windows) {
        if (w.obs_len() != b.obs_len || w.pred_len() != b.pred_len)
            throw ShapeError("all windows in a batch must share observation and prediction lengths");
        if (w.valid_mask.size() != w.obs_len()) throw ShapeError("validity mask length differs from observation length");
        if (std::none_of(w.valid_mask.begin(), w.valid_mask.end(), [](bool v) { return v; }))
            throw ModelError("window has no valid observation");
        const TrackWindow r = apply_normalization(to_representation(w, config_.representation), stats_);
        Vec2 residual;
        for (std::size_t t = 0; t < r.obs_len(); ++t) {
            b.obs_values.push_back(r.observed[t]);
            b.obs_valid.push_back(w.valid_mask[t]);
            if (!quantized) continue;
            const std::size_t cls = codebook_->quantize(r.observed[t] + residual);
            if (feedback) residual = r.observed[t] + residual - codebook_->dequantize(cls);
            b.obs_classes.push_back(cls);
        }
        if (with_future) {
            residual = {};
            for (const auto& v : r.future) {
                b.future_values.push_back(v);
                if (!quantized) continue;
                const std::size_t cls = codebook_->quantize(v + residual);
                if (feedback) residual = v + residual - codebook_->dequantize(cls);
                b.future_classes.push_back(cls);
            }
        }
    }
    if (quantized && with_future)
        for (std::size_t i = 0; i < b.future_values.size(); ++i)
            b.future_values[i] = codebook_->dequantize(b.future_classes[i]);
    if (quantized)
        for (std::size_t i = 0; i < b.obs_values.size(); ++i) b.obs_values[i] = codebook_->dequantize(b.obs_classes[i]);
    return b;
}

TrainOutputs ForecastModel::training_outputs(const PreparedBatch& batch, const DropoutContext& dropout,
                                             std::mt19937_64& rng) const {
    return net_->training_outputs(batch, dropout, rng);
}

std::vector<ForecastResult> ForecastModel::forecast(std::span<const TrackWindow> windows, const DecodeOptions& options,
                                                    std::span<const std::uint64_t> seeds) const {
    if (windows.empty()) return {};
    const std::size_t pred_len = options.pred_len == 0 ? config_.pred_len : options.pred_len;
    if (pred_len < 1) throw ConfigError("prediction length must be at least 1");
    if (options.oracle_endpoint && config_.architecture != Architecture::bert_os)
        throw ModelError("oracle endpoint decoding requires a bert_os model");
    if (!seeds.empty() && seeds.size() != windows.size()) throw ConfigError("need one seed per window");

    NoGradGuard no_grad;
    const PreparedBatch batch = prepare(windows, options.oracle_endpoint);
    const bool sampled = options.mode == DecodeMode::sampled;
    std::vector<std::mt19937_64> rngs;
    std::vector<ForecastResult> results(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const std::uint64_t seed = seeds.empty() ? derive_seed(options.seed, i) : seeds[i];
        rngs.emplace_back(seed);
        auto& r = results[i];
        r.head = config_.head;
        r.architecture = to_string(config_.architecture);
        r.sampling_mode = sampled ? "sampled" : "deterministic";
        r.seed = sampled ? seed : 0;
    }
    std::vector<std::vector<Vec2>> normalized(windows.size());

    const StepChooser choose = [&](std::size_t, const Tensor& rows, std::vector<StepInput>& chosen) {
        const std::size_t width = rows.cols();
        auto v = rows.values();
        for (std::size_t i = 0; i < windows.size(); ++i) {
            std::span<const double> row = v.subspan(i * width, width);
            auto& r = results[i];
            StepInput in;
            switch (config_.head) {
                case HeadKind::regressive:
                    in.value = {row[0], row[1]};
                    break;
                case HeadKind::gaussian: {
                    const GaussianParams g = GaussianParams::from_raw(row);
                    r.gaussians.push_back(g);
                    in.value = sampled ? g.sample(rngs[i]) : g.mu;
                    break;
                }
                case HeadKind::quantized: {
                    in.cls = sample_class(row, sampled ? options.temperature : 0.0, rngs[i]);
                    in.value = codebook_->dequantize(in.cls);
                    std::vector<double> probs(row.begin(), row.end());
                    const double mx = *std::max_element(probs.begin(), probs.end());
                    double z = 0.0;
                    for (double& p : probs) z += (p = std::exp(p - mx));
                    for (double& p : probs) p /= z;
                    r.class_probs.push_back(std::move(probs));
                    r.classes.push_back(in.cls);
                    break;
                }
            }
            normalized[i].push_back(in.value);
            chosen[i] = in;
        }
    };
    net_->decode(batch, pred_len, options.oracle_endpoint, choose);

    for (std::size_t i = 0; i < windows.size(); ++i) {
        auto& r = results[i];
        const TrackWindow repr = to_representation(windows[i], config_.representation);
        for (const auto& v : normalized[i]) r.step_values.push_back(stats_.invert(v));
        r.positions = decode_future(repr, r.step_values);
        if (options.oracle_endpoint) r.given_endpoint = decode_positions(windows[i])[windows[i].obs_len() + pred_len - 1];
    }
    return results;
}

ForecastResult ForecastModel::forecast(const TrackWindow& window, const DecodeOptions& options) const {
    return std::move(forecast(std::span<const TrackWindow>(&window, 1), options).front());
}

}  // namespace trajlab
