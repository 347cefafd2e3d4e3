#include "eegdec/generation.hpp"

#include "eegdec/container.hpp"
#include "eegdec/rng.hpp"
#include "eegdec/training.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>

using json = nlohmann::json;

namespace eegdec {

const char* kRealBackendEnvVar = "EEGDEC_REAL_BACKEND_DIR";

std::vector<std::string> ConditioningBundle::violations() const {
    std::vector<std::string> v;
    if (text_tokens.rows < 1 || text_tokens.cols < 1) v.push_back("text token grid is empty");
    if (image_embedding.empty()) v.push_back("image embedding is empty");
    if (!all_finite(text_tokens) || !all_finite(image_embedding))
        v.push_back("bundle contains non-finite entries");
    if (!(std::isfinite(double(lambda)) && lambda >= 0))
        v.push_back("lambda must be finite and >= 0");
    return v;
}

std::vector<std::string> BackendConfig::violations() const {
    std::vector<std::string> v;
    if (inference_steps < 1) v.push_back("inference_steps must be >= 1");
    if (image_size < 1) v.push_back("image_size must be >= 1");
    return v;
}

std::string BackendConfig::to_json() const {
    json j;
    j["kind"] = kind == Kind::toy ? "toy" : "real_adapter";
    j["inference_steps"] = inference_steps;
    j["sampler_id"] = sampler_id;
    j["image_size"] = image_size;
    j["seed"] = seed;
    return j.dump();
}

BackendConfig BackendConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("backend config: ") + e.what());
    }
    BackendConfig c;
    std::string kind = j.value("kind", "toy");
    if (kind == "toy") c.kind = Kind::toy;
    else if (kind == "real_adapter") c.kind = Kind::real_adapter;
    else throw ValidationError("backend config: unknown kind '" + kind + "'");
    c.inference_steps = j.value("inference_steps", c.inference_steps);
    c.sampler_id = j.value("sampler_id", c.kind == Kind::toy ? "ancestral" : "pndm");
    c.image_size = j.value("image_size", c.image_size);
    c.seed = j.value("seed", uint64_t(0));
    return c;
}

std::string GenerationProvenance::to_json() const {
    json j;
    j["recording_id"] = recording_id;
    j["image_checkpoint_hash"] = image_checkpoint_hash;
    j["text_checkpoint_hash"] = text_checkpoint_hash;
    j["backend_checkpoint_hash"] = backend_checkpoint_hash;
    j["backend_config"] = json::parse(backend_config_json.empty() ? "{}" : backend_config_json);
    j["lambda"] = lambda;
    j["drop_text"] = drop_text;
    j["drop_image"] = drop_image;
    j["seed"] = seed;
    return j.dump(2);
}

std::vector<std::string> ToyArchConfig::violations() const {
    std::vector<std::string> v;
    if (image_size < 1 || image_size > 16)
        v.push_back("toy backend expects small images (1..16), got " + std::to_string(image_size));
    if (d_model < 2 || d_model % 2 != 0) v.push_back("d_model must be even and >= 2");
    if (n_blocks < 1) v.push_back("n_blocks must be >= 1");
    if (n_img_tokens < 1) v.push_back("n_img_tokens must be >= 1");
    if (n_text_tokens < 1 || d_text < 1 || d_img < 1) v.push_back("conditioning dims must be >= 1");
    if (train_timesteps < 2) v.push_back("train_timesteps must be >= 2");
    return v;
}

std::string ToyArchConfig::to_json() const {
    json j;
    j["image_size"] = image_size;
    j["d_model"] = d_model;
    j["n_blocks"] = n_blocks;
    j["n_img_tokens"] = n_img_tokens;
    j["n_text_tokens"] = n_text_tokens;
    j["d_text"] = d_text;
    j["d_img"] = d_img;
    j["train_timesteps"] = train_timesteps;
    return j.dump();
}

ToyArchConfig ToyArchConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("toy arch config: ") + e.what());
    }
    ToyArchConfig c;
    c.image_size = j.value("image_size", c.image_size);
    c.d_model = j.value("d_model", c.d_model);
    c.n_blocks = j.value("n_blocks", c.n_blocks);
    c.n_img_tokens = j.value("n_img_tokens", c.n_img_tokens);
    c.n_text_tokens = j.value("n_text_tokens", c.n_text_tokens);
    c.d_text = j.value("d_text", c.d_text);
    c.d_img = j.value("d_img", c.d_img);
    c.train_timesteps = j.value("train_timesteps", c.train_timesteps);
    return c;
}

// ------------------------------------------------------------------
// denoiser internals

namespace {

constexpr float kLeakySlope = 0.01f;
constexpr float kLnEps = 1e-5f;

struct LnCache {
    MatF xhat;
    std::vector<float> inv_std;
};

MatF ln_forward(const MatF& x, const std::vector<float>& g, const std::vector<float>& b,
                LnCache* cache) {
    MatF out(x.rows, x.cols);
    if (cache) {
        cache->xhat = MatF(x.rows, x.cols);
        cache->inv_std.assign(x.rows, 0.0f);
    }
    for (size_t r = 0; r < x.rows; ++r) {
        const float* xr = x.row(r);
        double mean = 0;
        for (size_t c = 0; c < x.cols; ++c) mean += xr[c];
        mean /= double(x.cols);
        double var = 0;
        for (size_t c = 0; c < x.cols; ++c) {
            double d = xr[c] - mean;
            var += d * d;
        }
        var /= double(x.cols);
        float inv = float(1.0 / std::sqrt(var + kLnEps));
        float* o = out.row(r);
        for (size_t c = 0; c < x.cols; ++c) {
            float xhat = (xr[c] - float(mean)) * inv;
            if (cache) cache->xhat(r, c) = xhat;
            o[c] = g[c] * xhat + b[c];
        }
        if (cache) cache->inv_std[r] = inv;
    }
    return out;
}

MatF ln_backward(const MatF& dy, const LnCache& cache, const std::vector<float>& g,
                 std::vector<float>& g_gain, std::vector<float>& g_bias) {
    MatF dx(dy.rows, dy.cols);
    const size_t D = dy.cols;
    for (size_t r = 0; r < dy.rows; ++r) {
        const float* dyr = dy.row(r);
        const float* xh = cache.xhat.row(r);
        double s1 = 0, s2 = 0;
        for (size_t c = 0; c < D; ++c) {
            float dxh = dyr[c] * g[c];
            g_gain[c] += dyr[c] * xh[c];
            g_bias[c] += dyr[c];
            s1 += dxh;
            s2 += double(dxh) * xh[c];
        }
        float inv = cache.inv_std[r];
        float* dxr = dx.row(r);
        for (size_t c = 0; c < D; ++c) {
            float dxh = dyr[c] * g[c];
            dxr[c] = inv / float(D) * (float(D) * dxh - float(s1) - xh[c] * float(s2));
        }
    }
    return dx;
}

void add_row_vector(MatF& x, const std::vector<float>& v) {
    for (size_t r = 0; r < x.rows; ++r) {
        float* xr = x.row(r);
        for (size_t c = 0; c < x.cols; ++c) xr[c] += v[c];
    }
}

std::vector<float> col_sum(const MatF& x) {
    std::vector<float> s(x.cols, 0.0f);
    for (size_t r = 0; r < x.rows; ++r) {
        const float* xr = x.row(r);
        for (size_t c = 0; c < x.cols; ++c) s[c] += xr[c];
    }
    return s;
}

void acc(MatF& dst, const MatF& src) {
    for (size_t i = 0; i < dst.size(); ++i) dst.v[i] += src.v[i];
}

void acc(std::vector<float>& dst, const std::vector<float>& src) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

std::vector<float> time_embedding(int t, int d) {
    std::vector<float> e(size_t(d), 0.0f);
    for (int j = 0; j < d / 2; ++j) {
        double freq = std::pow(10000.0, -2.0 * j / double(d));
        e[size_t(2 * j)] = float(std::sin(t * freq));
        e[size_t(2 * j + 1)] = float(std::cos(t * freq));
    }
    return e;
}

struct BlockWeights {
    std::vector<float> ln1_g, ln1_b, ln2_g, ln2_b, bo, b1, b2;
    MatF wq, wkt, wvt, wki, wvi, wo, w1, w2;
};

struct DenoiserWeights {
    MatF embed_w;               // [d x 3]
    std::vector<float> embed_b; // [d]
    MatF pos;                   // [m x d]
    std::vector<BlockWeights> blocks;
    std::vector<float> ln3_g, ln3_b, bout;
    MatF wout;  // [3 x d]
    MatF proj_w; // [n_img_tokens*d x d_img]
    std::vector<float> proj_b;

    double image_branch_abs_sum() const {
        double s = 0;
        for (const auto& b : blocks) {
            for (float x : b.wki.v) s += std::abs(double(x));
            for (float x : b.wvi.v) s += std::abs(double(x));
        }
        for (float x : proj_w.v) s += std::abs(double(x));
        for (float x : proj_b) s += std::abs(double(x));
        return s;
    }
};

// Fixed traversal order over every tensor; W may be const or mutable.
template <typename W, typename F>
void visit_tensors(W& w, F&& f) {
    f(w.embed_w.v);
    f(w.embed_b);
    f(w.pos.v);
    for (auto& b : w.blocks) {
        f(b.ln1_g);
        f(b.ln1_b);
        f(b.wq.v);
        f(b.wkt.v);
        f(b.wvt.v);
        f(b.wki.v);
        f(b.wvi.v);
        f(b.wo.v);
        f(b.bo);
        f(b.ln2_g);
        f(b.ln2_b);
        f(b.w1.v);
        f(b.b1);
        f(b.w2.v);
        f(b.b2);
    }
    f(w.ln3_g);
    f(w.ln3_b);
    f(w.wout.v);
    f(w.bout);
    f(w.proj_w.v);
    f(w.proj_b);
}

size_t weights_flat_size(const DenoiserWeights& w) {
    size_t n = 0;
    visit_tensors(w, [&](const std::vector<float>& v) { n += v.size(); });
    return n;
}

void weights_to_flat(const DenoiserWeights& w, std::vector<float>& out) {
    out.clear();
    visit_tensors(w, [&](const std::vector<float>& v) { out.insert(out.end(), v.begin(), v.end()); });
}

void weights_from_flat(DenoiserWeights& w, const std::vector<float>& in) {
    size_t off = 0;
    visit_tensors(w, [&](std::vector<float>& v) {
        std::copy(in.begin() + std::ptrdiff_t(off), in.begin() + std::ptrdiff_t(off + v.size()),
                  v.begin());
        off += v.size();
    });
}

void weights_zero(DenoiserWeights& w) {
    visit_tensors(w, [](std::vector<float>& v) { std::fill(v.begin(), v.end(), 0.0f); });
}

DenoiserWeights make_weights(const ToyArchConfig& a) {
    const size_t m = size_t(a.image_size) * size_t(a.image_size);
    const size_t d = size_t(a.d_model);
    DenoiserWeights w;
    w.embed_w = MatF(d, 3);
    w.embed_b.assign(d, 0.0f);
    w.pos = MatF(m, d);
    w.blocks.resize(size_t(a.n_blocks));
    for (auto& b : w.blocks) {
        b.ln1_g.assign(d, 1.0f);
        b.ln1_b.assign(d, 0.0f);
        b.ln2_g.assign(d, 1.0f);
        b.ln2_b.assign(d, 0.0f);
        b.wq = MatF(d, d);
        b.wkt = MatF(d, size_t(a.d_text));
        b.wvt = MatF(d, size_t(a.d_text));
        b.wki = MatF(d, d);
        b.wvi = MatF(d, d);
        b.wo = MatF(d, d);
        b.bo.assign(d, 0.0f);
        b.w1 = MatF(2 * d, d);
        b.b1.assign(2 * d, 0.0f);
        b.w2 = MatF(d, 2 * d);
        b.b2.assign(d, 0.0f);
    }
    w.ln3_g.assign(d, 1.0f);
    w.ln3_b.assign(d, 0.0f);
    w.wout = MatF(3, d);
    w.bout.assign(3, 0.0f);
    w.proj_w = MatF(size_t(a.n_img_tokens) * d, size_t(a.d_img));
    w.proj_b.assign(size_t(a.n_img_tokens) * d, 0.0f);
    return w;
}

void init_weights(DenoiserWeights& w, const ToyArchConfig& a, uint64_t seed) {
    Rng rng = Rng(seed).fork("toy_init");
    auto fill = [&](MatF& m, double fan_in) {
        double s = 1.0 / std::sqrt(fan_in);
        for (float& x : m.v) x = float(rng.normal() * s);
    };
    fill(w.embed_w, 3);
    fill(w.pos, double(a.d_model)); // small positional offsets
    for (float& x : w.pos.v) x *= 0.1f;
    for (auto& b : w.blocks) {
        fill(b.wq, a.d_model);
        fill(b.wkt, a.d_text);
        fill(b.wvt, a.d_text);
        fill(b.wki, a.d_model);
        fill(b.wvi, a.d_model);
        fill(b.wo, a.d_model);
        fill(b.w1, a.d_model);
        fill(b.w2, 2 * a.d_model);
    }
    fill(w.wout, a.d_model);
    fill(w.proj_w, a.d_img);
}

struct BlockCache {
    MatF x_in;
    LnCache ln1;
    MatF n1, q, kt, vt, ki, vi;
    DcaCache<float> dca;
    MatF attn_out, x_mid;
    LnCache ln2;
    MatF n2, h;
};

struct FwdCache {
    MatF x_tokens;
    MatF p_tokens;
    MatF text_tokens;
    std::vector<float> image_embedding;
    float lambda = 1.0f;
    std::vector<BlockCache> blocks;
    LnCache ln3;
    MatF n3;
    MatF x_final;
};

struct NoiseSchedule {
    std::vector<double> betas, alphas_cum;
    explicit NoiseSchedule(int T) {
        betas.resize(size_t(T));
        alphas_cum.resize(size_t(T));
        double prod = 1.0;
        for (int t = 0; t < T; ++t) {
            betas[size_t(t)] = 1e-4 + (0.05 - 1e-4) * double(t) / double(std::max(1, T - 1));
            prod *= 1.0 - betas[size_t(t)];
            alphas_cum[size_t(t)] = prod;
        }
    }
};

MatF image_to_tokens(const Image& img) {
    // [-1, 1] model space, one token per pixel.
    MatF x(size_t(img.height) * size_t(img.width), 3);
    for (size_t i = 0; i < x.rows; ++i)
        for (size_t c = 0; c < 3; ++c) x(i, c) = img.rgb[i * 3 + c] * 2.0f - 1.0f;
    return x;
}

Image tokens_to_image(const MatF& x, int size) {
    Image img(size, size);
    for (size_t i = 0; i < x.rows; ++i)
        for (size_t c = 0; c < 3; ++c) {
            float p = (x(i, c) + 1.0f) * 0.5f;
            img.rgb[i * 3 + c] = p < 0.0f ? 0.0f : (p > 1.0f ? 1.0f : p);
        }
    return img;
}

} // namespace

// ------------------------------------------------------------------

struct ToyBackendModel::Impl {
    ToyArchConfig arch;
    DenoiserWeights weights;
    MatF null_text;
    NoiseSchedule schedule;
    std::string hash; // set when saved/loaded

    Impl(const ToyArchConfig& a, const MatF& null_text_tokens, uint64_t seed)
        : arch(a), weights(make_weights(a)), null_text(null_text_tokens),
          schedule(a.train_timesteps) {
        auto viol = arch.violations();
        if (!viol.empty()) throw ValidationError("toy backend: " + viol.front());
        if (int(null_text.rows) != arch.n_text_tokens || int(null_text.cols) != arch.d_text)
            throw ValidationError("toy backend: null-text grid shape does not match arch config");
        init_weights(weights, arch, seed);
    }

    MatF forward(const MatF& x_tokens, int t, const MatF& text_tokens,
                 const std::vector<float>& img_emb, float lambda, FwdCache* cache) const {
        const size_t m = size_t(arch.image_size) * size_t(arch.image_size);
        if (x_tokens.rows != m || x_tokens.cols != 3)
            throw ValidationError("toy backend: pixel token shape mismatch");
        if (int(text_tokens.rows) != arch.n_text_tokens || int(text_tokens.cols) != arch.d_text)
            throw ValidationError("toy backend: text token grid is [" + std::to_string(text_tokens.rows) +
                                  "x" + std::to_string(text_tokens.cols) + "], expected [" +
                                  std::to_string(arch.n_text_tokens) + "x" + std::to_string(arch.d_text) + "]");
        if (int(img_emb.size()) != arch.d_img)
            throw ValidationError("toy backend: image embedding length " + std::to_string(img_emb.size()) +
                                  ", expected " + std::to_string(arch.d_img));

        ImageProjector<float> proj{weights.proj_w, weights.proj_b, arch.n_img_tokens, arch.d_model};
        MatF p = project_image_embedding(img_emb, proj);

        MatF x = matmul_nt(x_tokens, weights.embed_w);
        add_row_vector(x, weights.embed_b);
        acc(x, weights.pos);
        add_row_vector(x, time_embedding(t, arch.d_model));

        if (cache) {
            cache->x_tokens = x_tokens;
            cache->p_tokens = p;
            cache->text_tokens = text_tokens;
            cache->image_embedding = img_emb;
            cache->lambda = lambda;
            cache->blocks.resize(weights.blocks.size());
        }

        for (size_t bi = 0; bi < weights.blocks.size(); ++bi) {
            const BlockWeights& b = weights.blocks[bi];
            BlockCache* bc = cache ? &cache->blocks[bi] : nullptr;
            if (bc) bc->x_in = x;

            MatF n1 = ln_forward(x, b.ln1_g, b.ln1_b, bc ? &bc->ln1 : nullptr);
            MatF q = matmul_nt(n1, b.wq);
            MatF kt = matmul_nt(text_tokens, b.wkt);
            MatF vt = matmul_nt(text_tokens, b.wvt);
            MatF ki = matmul_nt(p, b.wki);
            MatF vi = matmul_nt(p, b.wvi);
            DcaCache<float> dca;
            MatF attn = decoupled_cross_attention(q, kt, vt, ki, vi, lambda, bc ? &dca : nullptr);
            MatF proj_out = matmul_nt(attn, b.wo);
            add_row_vector(proj_out, b.bo);
            acc(x, proj_out);
            if (bc) {
                bc->n1 = std::move(n1);
                bc->q = std::move(q);
                bc->kt = std::move(kt);
                bc->vt = std::move(vt);
                bc->ki = std::move(ki);
                bc->vi = std::move(vi);
                bc->dca = std::move(dca);
                bc->attn_out = attn;
                bc->x_mid = x;
            }

            MatF n2 = ln_forward(x, b.ln2_g, b.ln2_b, bc ? &bc->ln2 : nullptr);
            MatF h = matmul_nt(n2, b.w1);
            add_row_vector(h, b.b1);
            for (float& e : h.v) e = e > 0.0f ? e : kLeakySlope * e;
            MatF mlp = matmul_nt(h, b.w2);
            add_row_vector(mlp, b.b2);
            acc(x, mlp);
            if (bc) {
                bc->n2 = std::move(n2);
                bc->h = std::move(h);
            }
        }

        MatF n3 = ln_forward(x, weights.ln3_g, weights.ln3_b, cache ? &cache->ln3 : nullptr);
        MatF eps = matmul_nt(n3, weights.wout);
        add_row_vector(eps, weights.bout);
        if (cache) {
            cache->n3 = std::move(n3);
            cache->x_final = std::move(x);
        }
        return eps;
    }

    void backward(const MatF& d_eps, const FwdCache& cache, DenoiserWeights& g) const {
        MatF d_n3 = matmul(d_eps, weights.wout);
        acc(g.wout, matmul_tn(d_eps, cache.n3));
        acc(g.bout, col_sum(d_eps));
        MatF dx = ln_backward(d_n3, cache.ln3, weights.ln3_g, g.ln3_g, g.ln3_b);

        MatF d_p(cache.p_tokens.rows, cache.p_tokens.cols);
        for (size_t bi = weights.blocks.size(); bi-- > 0;) {
            const BlockWeights& b = weights.blocks[bi];
            const BlockCache& bc = cache.blocks[bi];
            BlockWeights& gb = g.blocks[bi];

            // MLP sub-block (x_out = x_mid + mlp).
            acc(gb.w2, matmul_tn(dx, bc.h));
            acc(gb.b2, col_sum(dx));
            MatF dh = matmul(dx, b.w2);
            for (size_t i = 0; i < dh.size(); ++i)
                dh.v[i] *= bc.h.v[i] > 0.0f ? 1.0f : kLeakySlope;
            acc(gb.w1, matmul_tn(dh, bc.n2));
            acc(gb.b1, col_sum(dh));
            MatF d_n2 = matmul(dh, b.w1);
            MatF d_xmid = ln_backward(d_n2, bc.ln2, b.ln2_g, gb.ln2_g, gb.ln2_b);
            acc(d_xmid, dx);

            // Attention sub-block (x_mid = x_in + attn * wo^T + bo).
            acc(gb.wo, matmul_tn(d_xmid, bc.attn_out));
            acc(gb.bo, col_sum(d_xmid));
            MatF d_attn = matmul(d_xmid, b.wo);
            DcaGrads<float> ag = decoupled_cross_attention_backward(
                d_attn, bc.q, bc.kt, bc.vt, bc.ki, bc.vi, cache.lambda, bc.dca);
            acc(gb.wq, matmul_tn(ag.d_q, bc.n1));
            MatF d_n1 = matmul(ag.d_q, b.wq);
            acc(gb.wkt, matmul_tn(ag.d_k_text, cache.text_tokens));
            acc(gb.wvt, matmul_tn(ag.d_v_text, cache.text_tokens));
            acc(gb.wki, matmul_tn(ag.d_k_image, cache.p_tokens));
            acc(gb.wvi, matmul_tn(ag.d_v_image, cache.p_tokens));
            acc(d_p, matmul(ag.d_k_image, b.wki));
            acc(d_p, matmul(ag.d_v_image, b.wvi));

            dx = ln_backward(d_n1, bc.ln1, b.ln1_g, gb.ln1_g, gb.ln1_b);
            acc(dx, d_xmid);
        }

        // Embedding layer.
        acc(g.embed_w, matmul_tn(dx, cache.x_tokens));
        acc(g.embed_b, col_sum(dx));
        acc(g.pos, dx);

        // Projector (image conditioning path): d_p is [n_img_tokens x d],
        // flattened rows match proj_w rows.
        for (size_t r = 0; r < d_p.size(); ++r) {
            float d = d_p.v[r];
            g.proj_b[r] += d;
            if (d == 0.0f) continue;
            float* gw = g.proj_w.row(r);
            for (size_t c = 0; c < g.proj_w.cols; ++c) gw[c] += d * cache.image_embedding[c];
        }
    }
};

ToyBackendModel::ToyBackendModel(const ToyArchConfig& arch, const MatF& null_text_tokens,
                                 uint64_t init_seed)
    : impl_(std::make_unique<Impl>(arch, null_text_tokens, init_seed)) {}

ToyBackendModel::~ToyBackendModel() = default;

const ToyArchConfig& ToyBackendModel::arch() const { return impl_->arch; }
const MatF& ToyBackendModel::null_text_tokens() const { return impl_->null_text; }

MatF ToyBackendModel::predict_noise(const MatF& x_tokens, int t, const MatF& text_tokens,
                                    const std::vector<float>& image_embedding, float lambda) const {
    return impl_->forward(x_tokens, t, text_tokens, image_embedding, lambda, nullptr);
}

ToyTrainResult ToyBackendModel::train(const std::vector<ToyTrainItem>& items,
                                      const ToyTrainConfig& cfg) {
    Impl& im = *impl_;
    if (items.empty()) throw ValidationError("toy backend train: no items");
    for (const auto& it : items) {
        if (it.image.height != im.arch.image_size || it.image.width != im.arch.image_size)
            throw ValidationError("toy backend train: item image is " + std::to_string(it.image.height) +
                                  "x" + std::to_string(it.image.width) + ", arch expects " +
                                  std::to_string(im.arch.image_size));
    }
    if (cfg.steps < 1 || cfg.batch_size < 1)
        throw ValidationError("toy backend train: steps and batch_size must be >= 1");

    const size_t m = size_t(im.arch.image_size) * size_t(im.arch.image_size);
    const int T = im.arch.train_timesteps;

    std::vector<MatF> x0_tokens;
    x0_tokens.reserve(items.size());
    for (const auto& it : items) x0_tokens.push_back(image_to_tokens(it.image));

    std::vector<float> flat_params, flat_grads;
    weights_to_flat(im.weights, flat_params);
    DenoiserWeights grads = make_weights(im.arch);
    AdamW opt;
    Rng run_rng(cfg.seed);
    ToyTrainResult result;

    for (int step = 0; step < cfg.steps; ++step) {
        Rng srng = run_rng.fork("step", uint64_t(step));
        weights_zero(grads);
        double loss_acc = 0;
        for (int bi = 0; bi < cfg.batch_size; ++bi) {
            size_t idx = size_t(srng.uniform_int(items.size()));
            int t = int(srng.uniform_int(uint64_t(T)));
            bool drop_text = srng.uniform() < cfg.drop_prob_text;
            bool drop_image = srng.uniform() < cfg.drop_prob_image;
            float lambda = drop_image ? 0.0f : float(cfg.lambda_train);
            const MatF& text = drop_text ? im.null_text : items[idx].text_tokens;

            double ab = im.schedule.alphas_cum[size_t(t)];
            double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
            MatF x_t(m, 3);
            MatF noise(m, 3);
            for (size_t i = 0; i < x_t.size(); ++i) {
                noise.v[i] = float(srng.normal());
                x_t.v[i] = float(sa * x0_tokens[idx].v[i] + sb * noise.v[i]);
            }

            FwdCache cache;
            MatF eps = im.forward(x_t, t, text, items[idx].image_embedding, lambda, &cache);
            double loss = mse_loss(eps, noise);
            loss_acc += loss;

            MatF d_eps(eps.rows, eps.cols);
            const double scale = 2.0 / (double(eps.size()) * double(cfg.batch_size));
            for (size_t i = 0; i < eps.size(); ++i)
                d_eps.v[i] = float(scale * (double(eps.v[i]) - double(noise.v[i])));
            im.backward(d_eps, cache, grads);
        }
        double loss = loss_acc / double(cfg.batch_size);
        if (!std::isfinite(loss))
            throw Error("toy backend train: NaN loss at step " + std::to_string(step));
        result.loss_history.push_back(loss);
        result.image_branch_grad_abs_sum += grads.image_branch_abs_sum();

        weights_to_flat(grads, flat_grads);
        opt.step(flat_params, flat_grads, cfg.lr, 0.0);
        weights_from_flat(im.weights, flat_params);
    }
    return result;
}

Image ToyBackendModel::sample(const MatF& text_tokens, const std::vector<float>& image_embedding,
                              float lambda, int inference_steps, uint64_t seed) const {
    const Impl& im = *impl_;
    const size_t m = size_t(im.arch.image_size) * size_t(im.arch.image_size);
    const int T = im.arch.train_timesteps;
    if (inference_steps < 1) throw ValidationError("toy backend: inference_steps must be >= 1");

    // Evenly spaced timestep subsequence, iterated high to low.
    int n = std::min(inference_steps, T);
    std::vector<int> taus;
    for (int k = 0; k < n; ++k) {
        int tau = n == 1 ? T - 1 : int(std::llround(double(k) * double(T - 1) / double(n - 1)));
        if (taus.empty() || taus.back() != tau) taus.push_back(tau);
    }

    Rng rng = Rng(seed).fork("toy_sample");
    MatF x(m, 3);
    for (float& v : x.v) v = float(rng.normal());

    MatF x0_hat(m, 3);
    for (size_t si = taus.size(); si-- > 0;) {
        int tau = taus[si];
        MatF eps = im.forward(x, tau, text_tokens, image_embedding, lambda, nullptr);
        size_t step_index = taus.size() - 1 - si;
        if (!all_finite(eps))
            throw Error("toy backend: NaN in denoising loop at step index " +
                        std::to_string(step_index));
        double ab = im.schedule.alphas_cum[size_t(tau)];
        double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
        for (size_t i = 0; i < x.size(); ++i) {
            double v = (double(x.v[i]) - sb * double(eps.v[i])) / sa;
            x0_hat.v[i] = float(v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v));
        }
        if (si == 0) break;
        double ab_prev = im.schedule.alphas_cum[size_t(taus[si - 1])];
        // Ancestral (eta = 1) update between the selected timesteps.
        double var = (1.0 - ab_prev) / (1.0 - ab) * (1.0 - ab / ab_prev);
        double sigma = std::sqrt(std::max(0.0, var));
        double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma));
        for (size_t i = 0; i < x.size(); ++i)
            x.v[i] = float(std::sqrt(ab_prev) * x0_hat.v[i] + dir * eps.v[i] +
                           sigma * rng.normal());
    }
    return tokens_to_image(x0_hat, im.arch.image_size);
}

void ToyBackendModel::save(const std::string& path) const {
    Container c;
    c.magic = "EEGB";
    json h;
    h["kind"] = "toy_backend";
    h["arch"] = json::parse(impl_->arch.to_json());
    h["null_text_rows"] = impl_->null_text.rows;
    h["null_text_cols"] = impl_->null_text.cols;
    std::vector<float> flat;
    weights_to_flat(impl_->weights, flat);
    h["n_weights"] = flat.size();
    c.header_json = h.dump();
    c.payload = std::move(flat);
    c.payload.insert(c.payload.end(), impl_->null_text.v.begin(), impl_->null_text.v.end());
    write_container(path, c);
    impl_->hash = container_hash(c);
}

std::unique_ptr<ToyBackendModel> ToyBackendModel::load(const std::string& path) {
    Container c = read_container(path, "EEGB", 1);
    json h;
    try {
        h = json::parse(c.header_json);
    } catch (const json::exception& e) {
        throw ParseError(path + ": bad toy backend header: " + e.what());
    }
    ToyArchConfig arch = ToyArchConfig::from_json(h.at("arch").dump());
    size_t nt_rows = h.at("null_text_rows").get<size_t>();
    size_t nt_cols = h.at("null_text_cols").get<size_t>();
    size_t n_weights = h.at("n_weights").get<size_t>();
    if (c.payload.size() != n_weights + nt_rows * nt_cols)
        throw ParseError(path + ": toy backend payload size mismatch");
    MatF null_text(nt_rows, nt_cols);
    std::copy(c.payload.begin() + std::ptrdiff_t(n_weights), c.payload.end(), null_text.v.begin());
    auto model = std::make_unique<ToyBackendModel>(arch, null_text, /*init_seed=*/0);
    std::vector<float> flat(c.payload.begin(), c.payload.begin() + std::ptrdiff_t(n_weights));
    if (flat.size() != weights_flat_size(model->impl_->weights))
        throw ParseError(path + ": toy backend weight count mismatch");
    weights_from_flat(model->impl_->weights, flat);
    model->impl_->hash = container_hash(c);
    return model;
}

std::string ToyBackendModel::content_hash() const {
    if (!impl_->hash.empty()) return impl_->hash;
    Container c;
    c.magic = "EEGB";
    json h;
    h["kind"] = "toy_backend";
    h["arch"] = json::parse(impl_->arch.to_json());
    std::vector<float> flat;
    weights_to_flat(impl_->weights, flat);
    c.header_json = h.dump();
    c.payload = std::move(flat);
    return container_hash(c);
}

ToyTrainResult train_toy_backend(ToyBackendModel& model, const std::vector<ToyTrainItem>& items,
                                 const ToyTrainConfig& cfg) {
    return model.train(items, cfg);
}

// ------------------------------------------------------------------
// backends

namespace {

class ToyBackend final : public DiffusionBackend {
  public:
    explicit ToyBackend(std::unique_ptr<ToyBackendModel> model) : model_(std::move(model)) {}

    Image generate_image(const ConditioningBundle& bundle, const BackendConfig& cfg) override {
        if (cfg.image_size != model_->arch().image_size)
            throw ValidationError("toy backend: config image_size " + std::to_string(cfg.image_size) +
                                  " does not match trained size " +
                                  std::to_string(model_->arch().image_size));
        return model_->sample(bundle.text_tokens, bundle.image_embedding, bundle.lambda,
                              cfg.inference_steps, cfg.seed);
    }

    MatF null_text_tokens() const override { return model_->null_text_tokens(); }
    std::string checkpoint_hash() const override { return model_->content_hash(); }

  private:
    std::unique_ptr<ToyBackendModel> model_;
};

// Adapter contract (documented in the README): given the text token grid,
// the image embedding, lambda, the step count and a seed, the pretrained
// latent-diffusion backend returns one RGB image. This build ships the
// interface only; generating requires the external weights.
class RealBackendAdapter final : public DiffusionBackend {
  public:
    Image generate_image(const ConditioningBundle&, const BackendConfig&) override {
        const char* dir = std::getenv(kRealBackendEnvVar);
        if (!dir || !*dir)
            throw Error(std::string("real diffusion backend unavailable: set ") + kRealBackendEnvVar +
                        " to the directory holding the pretrained latent-diffusion weights; no "
                        "fallback backend is substituted");
        if (!std::filesystem::exists(dir))
            throw Error(std::string("real diffusion backend unavailable: ") + kRealBackendEnvVar +
                        " points to '" + dir + "', which does not exist");
        throw Error("real diffusion backend unavailable: weights found at '" + std::string(dir) +
                    "' but no adapter implementation is linked into this build (see README for the "
                    "adapter contract)");
    }

    MatF null_text_tokens() const override {
        throw Error("real diffusion backend unavailable: the adapter owns its null-text embedding");
    }
    std::string checkpoint_hash() const override { return "real-adapter-unavailable"; }
};

} // namespace

std::unique_ptr<DiffusionBackend> make_toy_backend(const std::string& checkpoint_path) {
    return std::make_unique<ToyBackend>(ToyBackendModel::load(checkpoint_path));
}

std::unique_ptr<DiffusionBackend> make_real_backend_adapter() {
    return std::make_unique<RealBackendAdapter>();
}

std::unique_ptr<DiffusionBackend> make_backend(const BackendConfig& cfg,
                                               const std::string& toy_checkpoint_path) {
    if (cfg.kind == BackendConfig::Kind::toy) {
        if (toy_checkpoint_path.empty())
            throw ValidationError("backend: toy backend requires a checkpoint path");
        return make_toy_backend(toy_checkpoint_path);
    }
    return make_real_backend_adapter();
}

GenerationResult generate(DiffusionBackend& backend, const ConditioningBundle& bundle,
                          const BackendConfig& cfg, const std::string& recording_id) {
    auto bviol = bundle.violations();
    if (!bviol.empty()) throw ValidationError("generate: " + bviol.front());
    auto cviol = cfg.violations();
    if (!cviol.empty()) throw ValidationError("generate: " + cviol.front());

    ConditioningBundle resolved = bundle;
    if (resolved.drop_image) resolved.lambda = 0.0f;
    if (resolved.drop_text) resolved.text_tokens = backend.null_text_tokens();

    GenerationResult result;
    result.image = backend.generate_image(resolved, cfg);
    for (float p : result.image.rgb)
        if (!(p >= 0.0f && p <= 1.0f))
            throw Error("generate: backend produced pixels outside [0, 1]");
    result.provenance.recording_id = recording_id;
    result.provenance.backend_checkpoint_hash = backend.checkpoint_hash();
    result.provenance.backend_config_json = cfg.to_json();
    result.provenance.lambda = resolved.lambda;
    result.provenance.drop_text = bundle.drop_text;
    result.provenance.drop_image = bundle.drop_image;
    result.provenance.seed = cfg.seed;
    return result;
}

} // namespace eegdec
