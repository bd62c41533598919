#pragma once

#include <vector>

namespace contdiag {

// Valid-padding, stride-1 convolution shape bookkeeping.
struct ConvShape {
  int batch = 0;
  int in_ch = 0;
  int in_h = 0;
  int in_w = 0;
  int out_ch = 0;
  int k = 3;

  int out_h() const { return in_h - k + 1; }
  int out_w() const { return in_w - k + 1; }
  long long in_plane() const { return static_cast<long long>(in_h) * in_w; }
  long long out_plane() const { return static_cast<long long>(out_h()) * out_w(); }
  long long patch_len() const { return static_cast<long long>(in_ch) * k * k; }
};

// OpenMP kernels. Every output element is owned by exactly one thread and
// accumulated in a fixed order, so results are bit-identical across thread
// counts and repeated runs.
namespace kernels {

// in:  [batch][in_ch][in_h][in_w]
// w:   [out_ch][in_ch][k][k], bias: [out_ch]
// out: [batch][out_ch][out_h][out_w]
void conv_forward(const double* in, const double* w, const double* bias, const ConvShape& s,
                  double* out);

// dout -> din (may be null), dw, db. dw/db are overwritten, not accumulated.
void conv_backward(const double* in, const double* w, const ConvShape& s, const double* dout,
                   double* din, double* dw, double* db);

// 2x2 max pooling, stride 2, floor semantics (odd trailing row/col dropped),
// ties to the first element in row-major order. argmax holds flat indices
// into the input plane of each (image, channel).
void maxpool_forward(const double* in, int batch, int ch, int h, int w, double* out, int* argmax);
void maxpool_backward(const double* dout, const int* argmax, int batch, int ch, int h, int w,
                      double* din);

void relu_forward(double* x, long long n);
// dy masked by forward output y.
void relu_backward(const double* y, double* dy, long long n);

// Per-channel batch normalization over (batch, spatial). Training mode uses
// batch statistics and reports them; eval mode uses running statistics.
void bn_forward_train(const double* in, int batch, int ch, long long plane, const double* gamma,
                      const double* beta, double eps, double* out, double* mean, double* var,
                      double* xhat);
void bn_forward_eval(const double* in, int batch, int ch, long long plane, const double* gamma,
                     const double* beta, const double* run_mean, const double* run_var, double eps,
                     double* out);
void bn_backward(const double* xhat, const double* var, const double* gamma, int batch, int ch,
                 long long plane, double eps, const double* dout, double* din, double* dgamma,
                 double* dbeta);

// feats: [batch][in_dim], w: [out_dim][in_dim], out: [batch][out_dim]
void dense_forward(const double* feats, const double* w, const double* bias, int batch, int in_dim,
                   int out_dim, double* out);
void dense_backward(const double* feats, const double* w, int batch, int in_dim, int out_dim,
                    const double* dout, double* dfeats, double* dw, double* db);

}  // namespace kernels

// Straight-line serial reference used by the unit tests and the kernel
// benchmark; direct convolution, no im2col.
namespace refk {

void conv_forward(const double* in, const double* w, const double* bias, const ConvShape& s,
                  double* out);
void conv_backward(const double* in, const double* w, const ConvShape& s, const double* dout,
                   double* din, double* dw, double* db);
void maxpool_forward(const double* in, int batch, int ch, int h, int w, double* out, int* argmax);
void maxpool_backward(const double* dout, const int* argmax, int batch, int ch, int h, int w,
                      double* din);
void bn_forward_train(const double* in, int batch, int ch, long long plane, const double* gamma,
                      const double* beta, double eps, double* out, double* mean, double* var,
                      double* xhat);
void bn_backward(const double* xhat, const double* var, const double* gamma, int batch, int ch,
                 long long plane, double eps, const double* dout, double* din, double* dgamma,
                 double* dbeta);
void dense_forward(const double* feats, const double* w, const double* bias, int batch, int in_dim,
                   int out_dim, double* out);
void dense_backward(const double* feats, const double* w, int batch, int in_dim, int out_dim,
                    const double* dout, double* dfeats, double* dw, double* db);

}  // namespace refk

}  // namespace contdiag
