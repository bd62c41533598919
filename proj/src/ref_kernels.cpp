#include <algorithm>
#include <cmath>
#include <cstring>

#include "contdiag/kernels.hpp"

namespace contdiag::refk {

void conv_forward(const double* in, const double* w, const double* bias, const ConvShape& s,
                  double* out) {
  const int oh = s.out_h();
  const int ow = s.out_w();
  for (int b = 0; b < s.batch; ++b) {
    for (int oc = 0; oc < s.out_ch; ++oc) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double acc = bias ? bias[oc] : 0.0;
          for (int c = 0; c < s.in_ch; ++c) {
            for (int ky = 0; ky < s.k; ++ky) {
              for (int kx = 0; kx < s.k; ++kx) {
                const double iv =
                    in[((static_cast<long long>(b) * s.in_ch + c) * s.in_h + oy + ky) * s.in_w +
                       ox + kx];
                const double wv =
                    w[((static_cast<long long>(oc) * s.in_ch + c) * s.k + ky) * s.k + kx];
                acc += iv * wv;
              }
            }
          }
          out[((static_cast<long long>(b) * s.out_ch + oc) * oh + oy) * ow + ox] = acc;
        }
      }
    }
  }
}

void conv_backward(const double* in, const double* w, const ConvShape& s, const double* dout,
                   double* din, double* dw, double* db) {
  const int oh = s.out_h();
  const int ow = s.out_w();
  std::memset(dw, 0, sizeof(double) * static_cast<size_t>(s.out_ch) * s.patch_len());
  std::memset(db, 0, sizeof(double) * static_cast<size_t>(s.out_ch));
  if (din) {
    std::memset(din, 0, sizeof(double) * static_cast<size_t>(s.batch) * s.in_ch * s.in_plane());
  }
  for (int b = 0; b < s.batch; ++b) {
    for (int oc = 0; oc < s.out_ch; ++oc) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const double g =
              dout[((static_cast<long long>(b) * s.out_ch + oc) * oh + oy) * ow + ox];
          db[oc] += g;
          for (int c = 0; c < s.in_ch; ++c) {
            for (int ky = 0; ky < s.k; ++ky) {
              for (int kx = 0; kx < s.k; ++kx) {
                const long long iidx =
                    ((static_cast<long long>(b) * s.in_ch + c) * s.in_h + oy + ky) * s.in_w + ox +
                    kx;
                const long long widx =
                    ((static_cast<long long>(oc) * s.in_ch + c) * s.k + ky) * s.k + kx;
                dw[widx] += g * in[iidx];
                if (din) din[iidx] += g * w[widx];
              }
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
  for (long long pc = 0; pc < static_cast<long long>(batch) * ch; ++pc) {
    const double* plane = in + pc * h * w;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        int best = -1;
        double bv = -HUGE_VAL;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int idx = (oy * 2 + dy) * w + ox * 2 + dx;
            if (plane[idx] > bv) {
              bv = plane[idx];
              best = idx;
            }
          }
        }
        out[pc * oh * ow + oy * ow + ox] = bv;
        argmax[pc * oh * ow + oy * ow + ox] = static_cast<int>(pc * h * w) + best;
      }
    }
  }
}

void maxpool_backward(const double* dout, const int* argmax, int batch, int ch, int h, int w,
                      double* din) {
  const int oh = h / 2;
  const int ow = w / 2;
  std::memset(din, 0, sizeof(double) * static_cast<size_t>(batch) * ch * h * w);
  for (long long o = 0; o < static_cast<long long>(batch) * ch * oh * ow; ++o) {
    din[argmax[o]] += dout[o];
  }
}

void bn_forward_train(const double* in, int batch, int ch, long long plane, const double* gamma,
                      const double* beta, double eps, double* out, double* mean, double* var,
                      double* xhat) {
  const double m = static_cast<double>(batch) * plane;
  for (int c = 0; c < ch; ++c) {
    double mu = 0.0;
    for (int b = 0; b < batch; ++b) {
      const long long off = (static_cast<long long>(b) * ch + c) * plane;
      for (long long i = 0; i < plane; ++i) mu += in[off + i];
    }
    mu /= m;
    double v = 0.0;
    for (int b = 0; b < batch; ++b) {
      const long long off = (static_cast<long long>(b) * ch + c) * plane;
      for (long long i = 0; i < plane; ++i) v += (in[off + i] - mu) * (in[off + i] - mu);
    }
    v /= m;
    mean[c] = mu;
    var[c] = v;
    const double inv = 1.0 / std::sqrt(v + eps);
    for (int b = 0; b < batch; ++b) {
      const long long off = (static_cast<long long>(b) * ch + c) * plane;
      for (long long i = 0; i < plane; ++i) {
        xhat[off + i] = (in[off + i] - mu) * inv;
        out[off + i] = gamma[c] * xhat[off + i] + beta[c];
      }
    }
  }
}

void bn_backward(const double* xhat, const double* var, const double* gamma, int batch, int ch,
                 long long plane, double eps, const double* dout, double* din, double* dgamma,
                 double* dbeta) {
  const double m = static_cast<double>(batch) * plane;
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
    for (int b = 0; b < batch; ++b) {
      const long long off = (static_cast<long long>(b) * ch + c) * plane;
      for (long long i = 0; i < plane; ++i) {
        din[off + i] =
            gamma[c] * inv / m * (m * dout[off + i] - sum_dy - xhat[off + i] * sum_dy_xhat);
      }
    }
  }
}

void dense_forward(const double* feats, const double* w, const double* bias, int batch, int in_dim,
                   int out_dim, double* out) {
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < out_dim; ++o) {
      double acc = bias ? bias[o] : 0.0;
      for (int i = 0; i < in_dim; ++i) {
        acc += feats[static_cast<long long>(b) * in_dim + i] *
               w[static_cast<long long>(o) * in_dim + i];
      }
      out[static_cast<long long>(b) * out_dim + o] = acc;
    }
  }
}

void dense_backward(const double* feats, const double* w, int batch, int in_dim, int out_dim,
                    const double* dout, double* dfeats, double* dw, double* db) {
  std::memset(dw, 0, sizeof(double) * static_cast<size_t>(out_dim) * in_dim);
  std::memset(db, 0, sizeof(double) * static_cast<size_t>(out_dim));
  if (dfeats) std::memset(dfeats, 0, sizeof(double) * static_cast<size_t>(batch) * in_dim);
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < out_dim; ++o) {
      const double g = dout[static_cast<long long>(b) * out_dim + o];
      db[o] += g;
      for (int i = 0; i < in_dim; ++i) {
        dw[static_cast<long long>(o) * in_dim + i] +=
            g * feats[static_cast<long long>(b) * in_dim + i];
        if (dfeats) {
          dfeats[static_cast<long long>(b) * in_dim + i] +=
              g * w[static_cast<long long>(o) * in_dim + i];
        }
      }
    }
  }
}

}  // namespace contdiag::refk
