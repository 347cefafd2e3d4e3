#include "eegdec/attention.hpp"

#include <cmath>

namespace eegdec {

template <typename T>
Mat<T> softmax_rows(const Mat<T>& scores) {
    Mat<T> out(scores.rows, scores.cols);
    for (size_t i = 0; i < scores.rows; ++i) {
        const T* s = scores.row(i);
        T* o = out.row(i);
        T mx = s[0];
        for (size_t j = 1; j < scores.cols; ++j) mx = std::max(mx, s[j]);
        T sum = 0;
        for (size_t j = 0; j < scores.cols; ++j) {
            o[j] = std::exp(s[j] - mx);
            sum += o[j];
        }
        for (size_t j = 0; j < scores.cols; ++j) o[j] /= sum;
    }
    return out;
}

namespace {

template <typename T>
void check_branch(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v, const char* name) {
    if (k.cols != q.cols)
        throw ValidationError(std::string("attention: ") + name + " keys have width " +
                              std::to_string(k.cols) + ", queries have width " +
                              std::to_string(q.cols));
    if (v.rows != k.rows)
        throw ValidationError(std::string("attention: ") + name + " has " + std::to_string(k.rows) +
                              " keys but " + std::to_string(v.rows) + " values");
    if (v.cols != q.cols)
        throw ValidationError(std::string("attention: ") + name + " values have width " +
                              std::to_string(v.cols) + ", expected " + std::to_string(q.cols));
    if (k.rows == 0) throw ValidationError(std::string("attention: ") + name + " branch is empty");
}

template <typename T>
Mat<T> scaled_scores(const Mat<T>& q, const Mat<T>& k) {
    Mat<T> s = matmul_nt(q, k);
    const T scale = T(1) / T(std::sqrt(double(q.cols)));
    for (T& x : s.v) x *= scale;
    return s;
}

// dScores = A o (dA - rowsum(dA o A)); the softmax Jacobian applied row-wise.
template <typename T>
Mat<T> softmax_backward(const Mat<T>& d_attn, const Mat<T>& attn) {
    Mat<T> out(attn.rows, attn.cols);
    for (size_t i = 0; i < attn.rows; ++i) {
        const T* da = d_attn.row(i);
        const T* a = attn.row(i);
        T dotv = 0;
        for (size_t j = 0; j < attn.cols; ++j) dotv += da[j] * a[j];
        T* o = out.row(i);
        for (size_t j = 0; j < attn.cols; ++j) o[j] = a[j] * (da[j] - dotv);
    }
    return out;
}

} // namespace

template <typename T>
Mat<T> decoupled_cross_attention(const Mat<T>& q, const Mat<T>& k_text, const Mat<T>& v_text,
                                 const Mat<T>& k_image, const Mat<T>& v_image, T lambda,
                                 DcaCache<T>* cache) {
    if (q.rows == 0 || q.cols == 0) throw ValidationError("attention: empty queries");
    check_branch(q, k_text, v_text, "text");
    check_branch(q, k_image, v_image, "image");
    if (!std::isfinite(double(lambda)) || lambda < T(0))
        throw ValidationError("attention: lambda must be finite and >= 0");

    Mat<T> attn_t = softmax_rows(scaled_scores(q, k_text));
    Mat<T> attn_i = softmax_rows(scaled_scores(q, k_image));
    Mat<T> out = matmul(attn_t, v_text);
    Mat<T> out_i = matmul(attn_i, v_image);
    for (size_t x = 0; x < out.size(); ++x) out.v[x] += lambda * out_i.v[x];
    if (cache) {
        cache->attn_text = std::move(attn_t);
        cache->attn_image = std::move(attn_i);
        cache->out_image = std::move(out_i);
    }
    return out;
}

template <typename T>
DcaGrads<T> decoupled_cross_attention_backward(const Mat<T>& d_out, const Mat<T>& q,
                                               const Mat<T>& k_text, const Mat<T>& v_text,
                                               const Mat<T>& k_image, const Mat<T>& v_image,
                                               T lambda, const DcaCache<T>& cache) {
    const T scale = T(1) / T(std::sqrt(double(q.cols)));
    DcaGrads<T> g;
    g.d_q = Mat<T>(q.rows, q.cols);

    // Text branch.
    g.d_v_text = matmul_tn(cache.attn_text, d_out);
    Mat<T> d_attn_t = matmul_nt(d_out, v_text);
    Mat<T> d_scores_t = softmax_backward(d_attn_t, cache.attn_text);
    for (T& x : d_scores_t.v) x *= scale;
    Mat<T> dq_t = matmul(d_scores_t, k_text);
    g.d_k_text = matmul_tn(d_scores_t, q);

    // Image branch, scaled by lambda.
    Mat<T> d_out_i = d_out;
    for (T& x : d_out_i.v) x *= lambda;
    g.d_v_image = matmul_tn(cache.attn_image, d_out_i);
    Mat<T> d_attn_i = matmul_nt(d_out_i, v_image);
    Mat<T> d_scores_i = softmax_backward(d_attn_i, cache.attn_image);
    for (T& x : d_scores_i.v) x *= scale;
    Mat<T> dq_i = matmul(d_scores_i, k_image);
    g.d_k_image = matmul_tn(d_scores_i, q);

    for (size_t x = 0; x < g.d_q.size(); ++x) g.d_q.v[x] = dq_t.v[x] + dq_i.v[x];
    g.d_lambda = T(0);
    for (size_t x = 0; x < d_out.size(); ++x) g.d_lambda += d_out.v[x] * cache.out_image.v[x];
    return g;
}

template <typename T>
Mat<T> single_attention(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v) {
    check_branch(q, k, v, "single");
    return matmul(softmax_rows(scaled_scores(q, k)), v);
}

template <typename T>
Mat<T> project_image_embedding(const std::vector<T>& embedding, const ImageProjector<T>& proj) {
    if (proj.weight.cols != embedding.size())
        throw ValidationError("image projector: embedding length " + std::to_string(embedding.size()) +
                              " does not match projector input " + std::to_string(proj.weight.cols));
    if (proj.weight.rows != size_t(proj.n_tokens) * size_t(proj.d) ||
        proj.bias.size() != proj.weight.rows)
        throw ValidationError("image projector: inconsistent projector shape");
    for (T x : embedding)
        if (!std::isfinite(double(x)))
            throw ValidationError("image projector: non-finite embedding");

    Mat<T> out(size_t(proj.n_tokens), size_t(proj.d));
    for (size_t r = 0; r < proj.weight.rows; ++r) {
        const T* w = proj.weight.row(r);
        T acc = proj.bias[r];
        for (size_t c = 0; c < proj.weight.cols; ++c) acc += w[c] * embedding[c];
        out.v[r] = acc;
    }
    return out;
}

// explicit instantiations
template Mat<float> softmax_rows(const Mat<float>&);
template Mat<double> softmax_rows(const Mat<double>&);
template Mat<float> decoupled_cross_attention(const Mat<float>&, const Mat<float>&, const Mat<float>&,
                                              const Mat<float>&, const Mat<float>&, float,
                                              DcaCache<float>*);
template Mat<double> decoupled_cross_attention(const Mat<double>&, const Mat<double>&,
                                               const Mat<double>&, const Mat<double>&,
                                               const Mat<double>&, double, DcaCache<double>*);
template DcaGrads<float> decoupled_cross_attention_backward(const Mat<float>&, const Mat<float>&,
                                                            const Mat<float>&, const Mat<float>&,
                                                            const Mat<float>&, const Mat<float>&,
                                                            float, const DcaCache<float>&);
template DcaGrads<double> decoupled_cross_attention_backward(const Mat<double>&, const Mat<double>&,
                                                             const Mat<double>&, const Mat<double>&,
                                                             const Mat<double>&, const Mat<double>&,
                                                             double, const DcaCache<double>&);
template Mat<float> single_attention(const Mat<float>&, const Mat<float>&, const Mat<float>&);
template Mat<double> single_attention(const Mat<double>&, const Mat<double>&, const Mat<double>&);
template Mat<float> project_image_embedding(const std::vector<float>&, const ImageProjector<float>&);
template Mat<double> project_image_embedding(const std::vector<double>&, const ImageProjector<double>&);

} // namespace eegdec
