#pragma once

#include "eegdec/mat.hpp"

#include <string>
#include <vector>

namespace eegdec {

// Decoupled cross-attention: a text-conditioned attention branch plus a
// lambda-scaled image-conditioned branch over the same queries,
//   out = softmax(Q Kt^T / sqrt(d)) Vt + lambda * softmax(Q Ki^T / sqrt(d)) Vi.
// Queries [m x d], text keys/values [n_t x d], image keys/values [n_i x d].

template <typename T>
struct DcaCache {
    Mat<T> attn_text;  // [m x n_t] softmax rows
    Mat<T> attn_image; // [m x n_i]
    Mat<T> out_image;  // image-branch output before lambda scaling
};

template <typename T>
Mat<T> decoupled_cross_attention(const Mat<T>& q, const Mat<T>& k_text, const Mat<T>& v_text,
                                 const Mat<T>& k_image, const Mat<T>& v_image, T lambda,
                                 DcaCache<T>* cache = nullptr);

template <typename T>
struct DcaGrads {
    Mat<T> d_q, d_k_text, d_v_text, d_k_image, d_v_image;
    T d_lambda = T(0);
};

template <typename T>
DcaGrads<T> decoupled_cross_attention_backward(const Mat<T>& d_out, const Mat<T>& q,
                                               const Mat<T>& k_text, const Mat<T>& v_text,
                                               const Mat<T>& k_image, const Mat<T>& v_image,
                                               T lambda, const DcaCache<T>& cache);

// Row-wise softmax with the usual max-subtraction stabilization.
template <typename T>
Mat<T> softmax_rows(const Mat<T>& scores);

// Plain single-branch scaled-dot-product attention (the lambda=0 limit),
// kept separate so tests can compare the two paths.
template <typename T>
Mat<T> single_attention(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v);

extern template Mat<float> decoupled_cross_attention(const Mat<float>&, const Mat<float>&,
                                                     const Mat<float>&, const Mat<float>&,
                                                     const Mat<float>&, float, DcaCache<float>*);
extern template Mat<double> decoupled_cross_attention(const Mat<double>&, const Mat<double>&,
                                                      const Mat<double>&, const Mat<double>&,
                                                      const Mat<double>&, double, DcaCache<double>*);

// ------------------------------------------------------------------
// Image-embedding projector: a learned linear map from the d_img embedding to
// n_tokens conditioning tokens of width d (the adapter-style token expansion
// in front of the image attention branch).

template <typename T>
struct ImageProjector {
    Mat<T> weight;      // [n_tokens*d x d_img]
    std::vector<T> bias; // [n_tokens*d]
    int n_tokens = 4;
    int d = 0;
};

template <typename T>
Mat<T> project_image_embedding(const std::vector<T>& embedding, const ImageProjector<T>& proj);

} // namespace eegdec
