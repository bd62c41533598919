#include "contdiag/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace contdiag::kernels {

namespace {

// patches: [batch][patch_len][out_plane]; column n = oy*out_w + ox.
void im2col(const double* in, const ConvShape& s, double* patches) {
  const long long K = s.patch_len();
  const long long N = s.out_plane();
  const int oh = s.out_h();
  const int ow = s.out_w();
#pragma omp parallel for
  for (int b = 0; b < s.batch; ++b) {
    const double* img = in + static_cast<long long>(b) * s.in_ch * s.in_plane();
    double* dst = patches + static_cast<long long>(b) * K * N;
    for (int c = 0; c < s.in_ch; ++c) {
      const double* plane = img + static_cast<long long>(c) * s.in_plane();
      for (int ky = 0; ky < s.k; ++ky) {
        for (int kx = 0; kx < s.k; ++kx) {
          double* row = dst + ((static_cast<long long>(c) * s.k + ky) * s.k + kx) * N;
          for (int oy = 0; oy < oh; ++oy) {
            const double* src = plane + static_cast<long long>(oy + ky) * s.in_w + kx;
            double* out_row = row + static_cast<long long>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) out_row[ox] = src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

void conv_forward(const double* in, const double* w, const double* bias, const ConvShape& s,
                  double* out) {
  const long long K = s.patch_len();
  const long long N = s.out_plane();
  std::vector<double> patches(static_cast<size_t>(s.batch) * K * N);
  im2col(in, s, patches.data());

#pragma omp parallel for collapse(2)
  for (int b = 0; b < s.batch; ++b) {
    for (int oc = 0; oc < s.out_ch; ++oc) {
      const double* p = patches.data() + static_cast<long long>(b) * K * N;
      const double* wrow = w + static_cast<long long>(oc) * K;
      double* orow = out + (static_cast<long long>(b) * s.out_ch + oc) * N;
      const double bv = bias ? bias[oc] : 0.0;
      for (long long n = 0; n < N; ++n) orow[n] = bv;
      for (long long kk = 0; kk < K; ++kk) {
        const double wv = wrow[kk];
        const double* prow = p + kk * N;
        for (long long n = 0; n < N; ++n) orow[n] += wv * prow[n];
      }
    }
  }
}

void conv_backward(const double* in, const double* w, const ConvShape& s, const double* dout,
                   double* din, double* dw, double* db) {
  const long long K = s.patch_len();
  const long long N = s.out_plane();
  std::vector<double> patches(static_cast<size_t>(s.batch) * K * N);
  im2col(in, s, patches.data());

#pragma omp parallel for
  for (int oc = 0; oc < s.out_ch; ++oc) {
    double* dwrow = dw + static_cast<long long>(oc) * K;
    for (long long kk = 0; kk < K; ++kk) dwrow[kk] = 0.0;
    double dbv = 0.0;
    for (int b = 0; b < s.batch; ++b) {
      const double* p = patches.data() + static_cast<long long>(b) * K * N;
      const double* drow = dout + (static_cast<long long>(b) * s.out_ch + oc) * N;
      for (long long kk = 0; kk < K; ++kk) {
        const double* prow = p + kk * N;
        double acc = 0.0;
        for (long long n = 0; n < N; ++n) acc += drow[n] * prow[n];
        dwrow[kk] += acc;
      }
      for (long long n = 0; n < N; ++n) dbv += drow[n];
    }
    db[oc] = dbv;
  }

  if (!din) return;
  const int oh = s.out_h();
  const int ow = s.out_w();
#pragma omp parallel
  {
    std::vector<double> dpatch(static_cast<size_t>(K) * N);
#pragma omp for
    for (int b = 0; b < s.batch; ++b) {
      std::fill(dpatch.begin(), dpatch.end(), 0.0);
      for (int oc = 0; oc < s.out_ch; ++oc) {
        const double* wrow = w + static_cast<long long>(oc) * K;
        const double* drow = dout + (static_cast<long long>(b) * s.out_ch + oc) * N;
        for (long long kk = 0; kk < K; ++kk) {
          const double wv = wrow[kk];
          double* dprow = dpatch.data() + kk * N;
          for (long long n = 0; n < N; ++n) dprow[n] += wv * drow[n];
        }
      }
      double* dimg = din + static_cast<long long>(b) * s.in_ch * s.in_plane();
      std::memset(dimg, 0, sizeof(double) * static_cast<size_t>(s.in_ch) * s.in_plane());
      for (int c = 0; c < s.in_ch; ++c) {
        double* plane = dimg + static_cast<long long>(c) * s.in_plane();
        for (int ky = 0; ky < s.k; ++ky) {
          for (int kx = 0; kx < s.k; ++kx) {
            const double* dprow =
                dpatch.data() + ((static_cast<long long>(c) * s.k + ky) * s.k + kx) * N;
            for (int oy = 0; oy < oh; ++oy) {
              double* dst = plane + static_cast<long long>(oy + ky) * s.in_w + kx;
              const double* src = dprow + static_cast<long long>(oy) * ow;
              for (int ox = 0; ox < ow; ++ox) dst[ox] += src[ox];
            }
          }
        }
      }
    }
  }
}

void maxpool_forward(const double* in, int batch, int ch, int h, int w, double* out, int* argmax) {
  const int oh = h / 2;
  const int ow = w / 2;
  const long long planes = static_cast<long long>(batch) * ch;
#pragma omp parallel for
  for (long long pc = 0; pc < planes; ++pc) {
    const double* plane = in + pc * h * w;
    double* oplane = out + pc * oh * ow;
    int* aplane = argmax + pc * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const int base = (oy * 2) * w + ox * 2;
        int best = base;
        double bv = plane[base];
        const int cands[3] = {base + 1, base + w, base + w + 1};
        for (int ci = 0; ci < 3; ++ci) {
          if (plane[cands[ci]] > bv) {
            bv = plane[cands[ci]];
            best = cands[ci];
          }
        }
        oplane[oy * ow + ox] = bv;
        aplane[oy * ow + ox] = static_cast<int>(pc * h * w) + best;
      }
    }
  }
}

void maxpool_backward(const double* dout, const int* argmax, int batch, int ch, int h, int w,
                      double* din) {
  const int oh = h / 2;
  const int ow = w / 2;
  const long long n_in = static_cast<long long>(batch) * ch * h * w;
  const long long n_out = static_cast<long long>(batch) * ch * oh * ow;
#pragma omp parallel for
  for (long long i = 0; i < n_in; ++i) din[i] = 0.0;
  // Pool windows are disjoint, so the scatter below has no write conflicts.
#pragma omp parallel for
  for (long long o = 0; o < n_out; ++o) din[argmax[o]] = dout[o];
}

void relu_forward(double* x, long long n) {
#pragma omp parallel for
  for (long long i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* y, double* dy, long long n) {
#pragma omp parallel for
  for (long long i = 0; i < n; ++i) {
    if (y[i] <= 0.0) dy[i] = 0.0;
  }
}

void bn_forward_train(const double* in, int batch, int ch, long long plane, const double* gamma,
                      const double* beta, double eps, double* out, double* mean, double* var,
                      double* xhat) {
  const double m = static_cast<double>(batch) * plane;
#pragma omp parallel for
  for (int c = 0; c < ch; ++c) {
    double mu = 0.0;
    for (int b = 0; b < batch; ++b) {
      const double* src = in + (static_cast<long long>(b) * ch + c) * plane;
      for (long long i = 0; i < plane; ++i) mu += src[i];
    }
    mu /= m;
    double v = 0.0;
    for (int b = 0; b < batch; ++b) {
      const double* src = in + (static_cast<long long>(b) * ch + c) * plane;
      for (long long i = 0; i < plane; ++i) {
        const double d = src[i] - mu;
        v += d * d;
      }
    }
    v /= m;
    const double inv = 1.0 / std::sqrt(v + eps);
    mean[c] = mu;
    var[c] = v;
    for (int b = 0; b < batch; ++b) {
      const long long off = (static_cast<long long>(b) * ch + c) * plane;
      for (long long i = 0; i < plane; ++i) {
        const double xh = (in[off + i] - mu) * inv;
        xhat[off + i] = xh;
        out[off + i] = gamma[c] * xh + beta[c];
      }
    }
  }
}

void bn_forward_eval(const double* in, int batch, int ch, long long plane, const double* gamma,
                     const double* beta, const double* run_mean, const double* run_var, double eps,
                     double* out) {
#pragma omp parallel for collapse(2)
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < ch; ++c) {
      const long long off = (static_cast<long long>(b) * ch + c) * plane;
      const double inv = 1.0 / std::sqrt(run_var[c] + eps);
      for (long long i = 0; i < plane; ++i) {
        out[off + i] = gamma[c] * (in[off + i] - run_mean[c]) * inv + beta[c];
      }
    }
  }
}

void bn_backward(const double* xhat, const double* var, const double* gamma, int batch, int ch,
                 long long plane, double eps, const double* dout, double* din, double* dgamma,
                 double* dbeta) {
  const double m = static_cast<double>(batch) * plane;
#pragma omp parallel for
  for (int c = 0; c < ch; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int b = 0; b < batch; ++b) {
      const long long off = (static_cast<long long>(b) * ch + c) * plane;
      for (long long i = 0; i < plane; ++i) {
        sum_dy += dout[off + i];
        sum_dy_xhat += dout[off + i] * xhat[off + i];
      }
    }
    dgamma[c] = sum_dy_xhat;
    dbeta[c] = sum_dy;
    const double inv = 1.0 / std::sqrt(var[c] + eps);
    const double g = gamma[c];
    for (int b = 0; b < batch; ++b) {
      const long long off = (static_cast<long long>(b) * ch + c) * plane;
      for (long long i = 0; i < plane; ++i) {
        din[off + i] =
            g * inv / m * (m * dout[off + i] - sum_dy - xhat[off + i] * sum_dy_xhat);
      }
    }
  }
}

void dense_forward(const double* feats, const double* w, const double* bias, int batch, int in_dim,
                   int out_dim, double* out) {
#pragma omp parallel for collapse(2)
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < out_dim; ++o) {
      const double* f = feats + static_cast<long long>(b) * in_dim;
      const double* wr = w + static_cast<long long>(o) * in_dim;
      double acc = bias ? bias[o] : 0.0;
      for (int i = 0; i < in_dim; ++i) acc += f[i] * wr[i];
      out[static_cast<long long>(b) * out_dim + o] = acc;
    }
  }
}

void dense_backward(const double* feats, const double* w, int batch, int in_dim, int out_dim,
                    const double* dout, double* dfeats, double* dw, double* db) {
#pragma omp parallel for
  for (int o = 0; o < out_dim; ++o) {
    double* dwr = dw + static_cast<long long>(o) * in_dim;
    for (int i = 0; i < in_dim; ++i) dwr[i] = 0.0;
    double acc = 0.0;
    for (int b = 0; b < batch; ++b) {
      const double g = dout[static_cast<long long>(b) * out_dim + o];
      const double* f = feats + static_cast<long long>(b) * in_dim;
      for (int i = 0; i < in_dim; ++i) dwr[i] += g * f[i];
      acc += g;
    }
    db[o] = acc;
  }
  if (!dfeats) return;
#pragma omp parallel for
  for (int b = 0; b < batch; ++b) {
    double* df = dfeats + static_cast<long long>(b) * in_dim;
    for (int i = 0; i < in_dim; ++i) df[i] = 0.0;
    for (int o = 0; o < out_dim; ++o) {
      const double g = dout[static_cast<long long>(b) * out_dim + o];
      const double* wr = w + static_cast<long long>(o) * in_dim;
      for (int i = 0; i < in_dim; ++i) df[i] += g * wr[i];
    }
  }
}

}  // namespace contdiag::kernels
