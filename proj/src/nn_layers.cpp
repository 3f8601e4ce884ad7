#include "mriq/nn.hpp"

#include <algorithm>
#include <cmath>

namespace mriq::nn {

namespace {

// C[M x N] += A[M x K] * B[K x N], all row-major contiguous. The k-innermost
// saxpy ordering keeps the inner loop contiguous so the compiler vectorizes.
template <typename T>
void matmul_acc(const T* a, const T* b, T* c, int m_dim, int k_dim, int n_dim) {
  for (int m = 0; m < m_dim; ++m) {
    const T* arow = a + static_cast<size_t>(m) * k_dim;
    T* crow = c + static_cast<size_t>(m) * n_dim;
    for (int k = 0; k < k_dim; ++k) {
      T av = arow[k];
      const T* brow = b + static_cast<size_t>(k) * n_dim;
      for (int n = 0; n < n_dim; ++n) crow[n] += av * brow[n];
    }
  }
}

// Unrolls one image into the patch matrix (in_ch*kh*kw) x (oh*ow); padded
// positions become zeros. Row r = (c*kh + ky)*kw + kx, column = oy*ow + ox.
template <typename T>
void im2col(const Tensor4<T>& x, int img, int kh, int kw, int stride,
            int pad_h, int pad_w, int oh, int ow, std::vector<T>& col) {
  const int in_h = x.h, in_w = x.w;
  col.assign(static_cast<size_t>(x.c) * kh * kw * oh * ow, T(0));
  size_t r = 0;
  for (int c = 0; c < x.c; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx, ++r) {
        T* dst = col.data() + r * oh * ow;
        // ox range with x.w bounds: ix = ox*stride - pad_w + kx in [0, in_w)
        int qx = pad_w - kx;
        int ox_lo = qx <= 0 ? 0 : (qx + stride - 1) / stride;
        int rx = in_w - 1 - kx + pad_w;
        int ox_hi = rx < 0 ? -1 : std::min(ow - 1, rx / stride);
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride - pad_h + ky;
          if (iy < 0 || iy >= in_h) continue;
          const T* src = x.row(img, c, iy);
          T* line = dst + static_cast<size_t>(oy) * ow;
          for (int ox = ox_lo; ox <= ox_hi; ++ox)
            line[ox] = src[ox * stride - pad_w + kx];
        }
      }
    }
  }
}

// Scatter-add of the patch-matrix gradient back onto one input image.
template <typename T>
void col2im_acc(const std::vector<T>& col, Tensor4<T>& dx, int img, int kh,
                int kw, int stride, int pad_h, int pad_w, int oh, int ow) {
  const int in_h = dx.h, in_w = dx.w;
  size_t r = 0;
  for (int c = 0; c < dx.c; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx, ++r) {
        const T* src = col.data() + r * oh * ow;
        int qx = pad_w - kx;
        int ox_lo = qx <= 0 ? 0 : (qx + stride - 1) / stride;
        int rx = in_w - 1 - kx + pad_w;
        int ox_hi = rx < 0 ? -1 : std::min(ow - 1, rx / stride);
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride - pad_h + ky;
          if (iy < 0 || iy >= in_h) continue;
          T* dst = dx.row(img, c, iy);
          const T* line = src + static_cast<size_t>(oy) * ow;
          for (int ox = ox_lo; ox <= ox_hi; ++ox)
            dst[ox * stride - pad_w + kx] += line[ox];
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- ConvLayer

template <typename T>
ConvLayer<T>::ConvLayer(std::string name, int in_ch, int out_ch, int kh,
                        int kw, int stride, int pad_h, int pad_w)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      kh_(kh),
      kw_(kw),
      stride_(stride),
      pad_h_(pad_h),
      pad_w_(pad_w),
      weight_(name + ".weight",
              static_cast<size_t>(out_ch) * in_ch * kh * kw),
      bias_(name + ".bias", static_cast<size_t>(out_ch)) {
  if (in_ch < 1 || out_ch < 1 || kh < 1 || kw < 1 || stride < 1 || pad_h < 0 ||
      pad_w < 0)
    throw ShapeError("conv " + name + ": invalid geometry");
}

template <typename T>
std::pair<int, int> ConvLayer<T>::output_hw(int h, int w, int kh, int kw,
                                            int stride, int pad_h, int pad_w) {
  int oh = (h + 2 * pad_h - kh) / stride + 1;
  int ow = (w + 2 * pad_w - kw) / stride + 1;
  return {oh, ow};
}

template <typename T>
Tensor4<T> ConvLayer<T>::apply(const Tensor4<T>& x) const {
  if (x.c != in_ch_)
    throw ShapeError("conv " + weight_.name + ": expected " +
                     std::to_string(in_ch_) + " input channels, got input " +
                     x.shape_str());
  auto [oh, ow] = output_hw(x.h, x.w, kh_, kw_, stride_, pad_h_, pad_w_);
  if (x.h + 2 * pad_h_ < kh_ || x.w + 2 * pad_w_ < kw_ || oh < 1 || ow < 1)
    throw ShapeError("conv " + weight_.name + ": kernel (" +
                     std::to_string(kh_) + "," + std::to_string(kw_) +
                     ") does not fit input " + x.shape_str());

  Tensor4<T> out(x.n, out_ch_, oh, ow);
  const int patch = in_ch_ * kh_ * kw_;
  const int spatial = oh * ow;
  std::vector<T> col;
  for (int img = 0; img < x.n; ++img) {
    im2col(x, img, kh_, kw_, stride_, pad_h_, pad_w_, oh, ow, col);
    T* dst = out.row(img, 0, 0);
    for (int oc = 0; oc < out_ch_; ++oc)
      std::fill_n(dst + static_cast<size_t>(oc) * spatial, spatial,
                  bias_.value[oc]);
    matmul_acc(weight_.value.data(), col.data(), dst, out_ch_, patch, spatial);
  }
  return out;
}

template <typename T>
Tensor4<T> ConvLayer<T>::forward(const Tensor4<T>& x, RunMode mode,
                                 std::vector<Tensor4<T>>*) {
  Tensor4<T> out = apply(x);
  if (mode == RunMode::Train) {
    cached_input_ = x;
    has_cache_ = true;
  }
  return out;
}

template <typename T>
Tensor4<T> ConvLayer<T>::backward(const Tensor4<T>& grad_out) {
  if (!has_cache_)
    throw Error("conv " + weight_.name + ": backward without train forward");
  const Tensor4<T>& x = cached_input_;
  auto [oh, ow] = output_hw(x.h, x.w, kh_, kw_, stride_, pad_h_, pad_w_);
  if (grad_out.n != x.n || grad_out.c != out_ch_ || grad_out.h != oh ||
      grad_out.w != ow)
    throw ShapeError("conv " + weight_.name + ": gradient shape " +
                     grad_out.shape_str() + " does not match output");

  const int patch = in_ch_ * kh_ * kw_;
  const int spatial = oh * ow;
  Tensor4<T> dx(x.n, x.c, x.h, x.w);

  // W transposed once: dcol = W^T (patch x out_ch) * dOut (out_ch x spatial).
  std::vector<T> wt(static_cast<size_t>(patch) * out_ch_);
  for (int oc = 0; oc < out_ch_; ++oc)
    for (int p = 0; p < patch; ++p)
      wt[static_cast<size_t>(p) * out_ch_ + oc] =
          weight_.value[static_cast<size_t>(oc) * patch + p];

  std::vector<T> col, colt, dcol;
  for (int img = 0; img < x.n; ++img) {
    im2col(x, img, kh_, kw_, stride_, pad_h_, pad_w_, oh, ow, col);
    // col transposed so the dW inner loop runs contiguously.
    colt.assign(static_cast<size_t>(spatial) * patch, T(0));
    for (int p = 0; p < patch; ++p)
      for (int s = 0; s < spatial; ++s)
        colt[static_cast<size_t>(s) * patch + p] =
            col[static_cast<size_t>(p) * spatial + s];

    const T* gout = grad_out.row(img, 0, 0);
    matmul_acc(gout, colt.data(), weight_.grad.data(), out_ch_, spatial,
               patch);
    for (int oc = 0; oc < out_ch_; ++oc) {
      double acc = 0;
      const T* g = gout + static_cast<size_t>(oc) * spatial;
      for (int s = 0; s < spatial; ++s) acc += static_cast<double>(g[s]);
      bias_.grad[oc] += static_cast<T>(acc);
    }

    dcol.assign(static_cast<size_t>(patch) * spatial, T(0));
    matmul_acc(wt.data(), gout, dcol.data(), patch, out_ch_, spatial);
    col2im_acc(dcol, dx, img, kh_, kw_, stride_, pad_h_, pad_w_, oh, ow);
  }
  return dx;
}

template <typename T>
void ConvLayer<T>::collect_params(std::vector<Param<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ----------------------------------------------------------- BatchNormLayer

template <typename T>
BatchNormLayer<T>::BatchNormLayer(std::string name, int channels,
                                  double momentum, double eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_(name + ".gamma", channels),
      beta_(name + ".beta", channels),
      running_mean_(name + ".running_mean", channels, false),
      running_var_(name + ".running_var", channels, false) {
  std::fill(gamma_.value.begin(), gamma_.value.end(), T(1));
  std::fill(running_var_.value.begin(), running_var_.value.end(), T(1));
}

template <typename T>
Tensor4<T> BatchNormLayer<T>::forward(const Tensor4<T>& x, RunMode mode,
                                      std::vector<Tensor4<T>>*) {
  if (x.c != channels_)
    throw ShapeError("batchnorm " + gamma_.name + ": expected " +
                     std::to_string(channels_) + " channels, got input " +
                     x.shape_str());
  const long m = static_cast<long>(x.n) * x.h * x.w;
  Tensor4<T> out(x.n, x.c, x.h, x.w);
  const int hw = x.h * x.w;

  if (mode == RunMode::Inference) {
    for (int c = 0; c < channels_; ++c) {
      double scale = static_cast<double>(gamma_.value[c]) /
                     std::sqrt(static_cast<double>(running_var_.value[c]) + eps_);
      double shift = static_cast<double>(beta_.value[c]) -
                     static_cast<double>(running_mean_.value[c]) * scale;
      for (int b = 0; b < x.n; ++b) {
        const T* src = x.row(b, c, 0);
        T* dst = out.row(b, c, 0);
        for (int i = 0; i < hw; ++i)
          dst[i] = static_cast<T>(src[i] * scale + shift);
      }
    }
    return out;
  }

  if (m < 2)
    throw Error("batchnorm " + gamma_.name +
                ": train mode needs at least 2 elements per channel, got " +
                std::to_string(m));

  cached_xhat_ = Tensor4<T>(x.n, x.c, x.h, x.w);
  cached_inv_std_.assign(channels_, 0.0);
  cached_m_ = m;

  for (int c = 0; c < channels_; ++c) {
    double sum = 0;
    for (int b = 0; b < x.n; ++b) {
      const T* src = x.row(b, c, 0);
      for (int i = 0; i < hw; ++i) sum += static_cast<double>(src[i]);
    }
    double mean = sum / m;
    double sq = 0;
    for (int b = 0; b < x.n; ++b) {
      const T* src = x.row(b, c, 0);
      for (int i = 0; i < hw; ++i) {
        double d = static_cast<double>(src[i]) - mean;
        sq += d * d;
      }
    }
    double var = sq / m;  // population variance
    double inv_std = 1.0 / std::sqrt(var + eps_);
    cached_inv_std_[c] = inv_std;

    double g = static_cast<double>(gamma_.value[c]);
    double bta = static_cast<double>(beta_.value[c]);
    for (int b = 0; b < x.n; ++b) {
      const T* src = x.row(b, c, 0);
      T* xh = cached_xhat_.row(b, c, 0);
      T* dst = out.row(b, c, 0);
      for (int i = 0; i < hw; ++i) {
        double xhat = (static_cast<double>(src[i]) - mean) * inv_std;
        xh[i] = static_cast<T>(xhat);
        dst[i] = static_cast<T>(g * xhat + bta);
      }
    }

    running_mean_.value[c] = static_cast<T>(
        (1.0 - momentum_) * static_cast<double>(running_mean_.value[c]) +
        momentum_ * mean);
    running_var_.value[c] = static_cast<T>(
        (1.0 - momentum_) * static_cast<double>(running_var_.value[c]) +
        momentum_ * var);
  }
  has_cache_ = true;
  return out;
}

template <typename T>
Tensor4<T> BatchNormLayer<T>::backward(const Tensor4<T>& grad_out) {
  if (!has_cache_)
    throw Error("batchnorm " + gamma_.name +
                ": backward without train forward");
  if (!grad_out.same_shape(cached_xhat_))
    throw ShapeError("batchnorm " + gamma_.name + ": gradient shape " +
                     grad_out.shape_str() + " does not match cached input");

  const long m = cached_m_;
  const int hw = grad_out.h * grad_out.w;
  Tensor4<T> dx(grad_out.n, grad_out.c, grad_out.h, grad_out.w);

  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0, sum_dy_xhat = 0;
    for (int b = 0; b < grad_out.n; ++b) {
      const T* dy = grad_out.row(b, c, 0);
      const T* xh = cached_xhat_.row(b, c, 0);
      for (int i = 0; i < hw; ++i) {
        sum_dy += static_cast<double>(dy[i]);
        sum_dy_xhat += static_cast<double>(dy[i]) * static_cast<double>(xh[i]);
      }
    }
    gamma_.grad[c] += static_cast<T>(sum_dy_xhat);
    beta_.grad[c] += static_cast<T>(sum_dy);

    // dx = gamma*inv_std/m * (m*dy - sum(dy) - xhat*sum(dy*xhat))
    double coef =
        static_cast<double>(gamma_.value[c]) * cached_inv_std_[c] / m;
    for (int b = 0; b < grad_out.n; ++b) {
      const T* dy = grad_out.row(b, c, 0);
      const T* xh = cached_xhat_.row(b, c, 0);
      T* d = dx.row(b, c, 0);
      for (int i = 0; i < hw; ++i)
        d[i] = static_cast<T>(
            coef * (m * static_cast<double>(dy[i]) - sum_dy -
                    static_cast<double>(xh[i]) * sum_dy_xhat));
    }
  }
  return dx;
}

template <typename T>
void BatchNormLayer<T>::collect_params(std::vector<Param<T>*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

// ---------------------------------------------------------------- ReluLayer

template <typename T>
Tensor4<T> relu(const Tensor4<T>& x) {
  Tensor4<T> out = x;
  for (T& v : out.data) v = v > T(0) ? v : T(0);
  return out;
}

template <typename T>
Tensor4<T> ReluLayer<T>::forward(const Tensor4<T>& x, RunMode mode,
                                 std::vector<Tensor4<T>>* capture) {
  Tensor4<T> out = relu(x);
  if (mode == RunMode::Train) {
    cached_output_ = out;
    has_cache_ = true;
  }
  if (capture) capture->push_back(out);
  return out;
}

template <typename T>
Tensor4<T> ReluLayer<T>::backward(const Tensor4<T>& grad_out) {
  if (!has_cache_)
    throw Error("relu " + name_ + ": backward without train forward");
  if (!grad_out.same_shape(cached_output_))
    throw ShapeError("relu " + name_ + ": gradient shape " +
                     grad_out.shape_str() + " does not match cached output");
  Tensor4<T> dx = grad_out;
  for (size_t i = 0; i < dx.data.size(); ++i)
    if (!(cached_output_.data[i] > T(0))) dx.data[i] = T(0);
  return dx;
}

// ------------------------------------------------------------- FlattenLayer

template <typename T>
Tensor4<T> FlattenLayer<T>::forward(const Tensor4<T>& x, RunMode mode,
                                    std::vector<Tensor4<T>>*) {
  if (mode == RunMode::Train) {
    in_c_ = x.c;
    in_h_ = x.h;
    in_w_ = x.w;
  }
  Tensor4<T> out = x;
  out.c = x.c * x.h * x.w;
  out.h = 1;
  out.w = 1;
  return out;
}

template <typename T>
Tensor4<T> FlattenLayer<T>::backward(const Tensor4<T>& grad_out) {
  Tensor4<T> dx = grad_out;
  dx.c = in_c_;
  dx.h = in_h_;
  dx.w = in_w_;
  return dx;
}

// ------------------------------------------------------- GlobalAvgPoolLayer

template <typename T>
Tensor4<T> GlobalAvgPoolLayer<T>::forward(const Tensor4<T>& x, RunMode mode,
                                          std::vector<Tensor4<T>>*) {
  if (mode == RunMode::Train) {
    in_h_ = x.h;
    in_w_ = x.w;
  }
  const int hw = x.h * x.w;
  Tensor4<T> out(x.n, x.c, 1, 1);
  for (int b = 0; b < x.n; ++b)
    for (int c = 0; c < x.c; ++c) {
      double acc = 0;
      const T* src = x.row(b, c, 0);
      for (int i = 0; i < hw; ++i) acc += static_cast<double>(src[i]);
      out.at(b, c, 0, 0) = static_cast<T>(acc / hw);
    }
  return out;
}

template <typename T>
Tensor4<T> GlobalAvgPoolLayer<T>::backward(const Tensor4<T>& grad_out) {
  const int hw = in_h_ * in_w_;
  Tensor4<T> dx(grad_out.n, grad_out.c, in_h_, in_w_);
  for (int b = 0; b < grad_out.n; ++b)
    for (int c = 0; c < grad_out.c; ++c) {
      T g = static_cast<T>(static_cast<double>(grad_out.at(b, c, 0, 0)) / hw);
      T* dst = dx.row(b, c, 0);
      for (int i = 0; i < hw; ++i) dst[i] = g;
    }
  return dx;
}

// --------------------------------------------------------------- DenseLayer

template <typename T>
DenseLayer<T>::DenseLayer(std::string name, int in_features, int num_classes)
    : in_features_(in_features),
      num_classes_(num_classes),
      weight_(name + ".weight",
              static_cast<size_t>(num_classes) * in_features),
      bias_(name + ".bias", static_cast<size_t>(num_classes)) {
  if (in_features < 1 || num_classes < 2)
    throw ShapeError("dense " + name + ": invalid geometry");
}

template <typename T>
Tensor4<T> DenseLayer<T>::apply(const Tensor4<T>& x) const {
  if (x.c * x.h * x.w != in_features_)
    throw ShapeError("dense " + weight_.name + ": expected " +
                     std::to_string(in_features_) + " features, got input " +
                     x.shape_str());
  Tensor4<T> out(x.n, num_classes_, 1, 1);
  for (int b = 0; b < x.n; ++b) {
    const T* src = x.row(b, 0, 0);
    for (int k = 0; k < num_classes_; ++k) {
      const T* wrow = weight_.value.data() +
                      static_cast<size_t>(k) * in_features_;
      double acc = static_cast<double>(bias_.value[k]);
      for (int f = 0; f < in_features_; ++f)
        acc += static_cast<double>(wrow[f]) * static_cast<double>(src[f]);
      out.at(b, k, 0, 0) = static_cast<T>(acc);
    }
  }
  return out;
}

template <typename T>
Tensor4<T> DenseLayer<T>::forward(const Tensor4<T>& x, RunMode mode,
                                  std::vector<Tensor4<T>>*) {
  Tensor4<T> out = apply(x);
  if (mode == RunMode::Train) {
    cached_input_ = x;
    has_cache_ = true;
  }
  return out;
}

template <typename T>
Tensor4<T> DenseLayer<T>::backward(const Tensor4<T>& grad_out) {
  if (!has_cache_)
    throw Error("dense " + weight_.name + ": backward without train forward");
  if (grad_out.n != cached_input_.n ||
      grad_out.c * grad_out.h * grad_out.w != num_classes_)
    throw ShapeError("dense " + weight_.name + ": gradient shape " +
                     grad_out.shape_str() + " does not match output");

  Tensor4<T> dx(cached_input_.n, cached_input_.c, cached_input_.h,
                cached_input_.w);
  for (int b = 0; b < grad_out.n; ++b) {
    const T* src = cached_input_.row(b, 0, 0);
    const T* g = grad_out.row(b, 0, 0);
    T* d = dx.row(b, 0, 0);
    for (int k = 0; k < num_classes_; ++k) {
      T gk = g[k];
      T* wgrad = weight_.grad.data() + static_cast<size_t>(k) * in_features_;
      const T* wrow = weight_.value.data() +
                      static_cast<size_t>(k) * in_features_;
      for (int f = 0; f < in_features_; ++f) {
        wgrad[f] += gk * src[f];
        d[f] += gk * wrow[f];
      }
      bias_.grad[k] += gk;
    }
  }
  return dx;
}

template <typename T>
void DenseLayer<T>::collect_params(std::vector<Param<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ------------------------------------------------------------ ResidualBlock

template <typename T>
ResidualBlock<T>::ResidualBlock(std::string name, int in_ch, int out_ch,
                                int stride)
    : conv1_(name + ".conv1", in_ch, out_ch, 3, 3, stride, 1, 1),
      conv2_(name + ".conv2", out_ch, out_ch, 3, 3, 1, 1, 1),
      bn1_(name + ".bn1", out_ch),
      bn2_(name + ".bn2", out_ch) {
  if (stride != 1 || in_ch != out_ch) {
    proj_conv_ = std::make_unique<ConvLayer<T>>(name + ".proj", in_ch, out_ch,
                                                1, 1, stride, 0, 0);
    proj_bn_ = std::make_unique<BatchNormLayer<T>>(name + ".proj_bn", out_ch);
  }
}

template <typename T>
Tensor4<T> ResidualBlock<T>::forward(const Tensor4<T>& x, RunMode mode,
                                     std::vector<Tensor4<T>>* capture) {
  Tensor4<T> y = conv1_.forward(x, mode, nullptr);
  y = bn1_.forward(y, mode, nullptr);
  y = relu(y);
  if (capture) capture->push_back(y);
  if (mode == RunMode::Train) cached_mid_ = y;

  Tensor4<T> main = bn2_.forward(conv2_.forward(y, mode, nullptr), mode,
                                 nullptr);
  Tensor4<T> shortcut =
      proj_conv_ ? proj_bn_->forward(proj_conv_->forward(x, mode, nullptr),
                                     mode, nullptr)
                 : x;
  if (!main.same_shape(shortcut))
    throw ShapeError("residual " + conv1_.weight_.name + ": main path " +
                     main.shape_str() + " vs shortcut " +
                     shortcut.shape_str());

  for (size_t i = 0; i < main.data.size(); ++i)
    main.data[i] += shortcut.data[i];
  Tensor4<T> out = relu(main);
  if (capture) capture->push_back(out);
  if (mode == RunMode::Train) {
    cached_out_ = out;
    has_cache_ = true;
  }
  return out;
}

template <typename T>
Tensor4<T> ResidualBlock<T>::backward(const Tensor4<T>& grad_out) {
  if (!has_cache_)
    throw Error("residual " + conv1_.weight_.name +
                ": backward without train forward");

  Tensor4<T> dz = grad_out;
  for (size_t i = 0; i < dz.data.size(); ++i)
    if (!(cached_out_.data[i] > T(0))) dz.data[i] = T(0);

  Tensor4<T> dmid = conv2_.backward(bn2_.backward(dz));
  for (size_t i = 0; i < dmid.data.size(); ++i)
    if (!(cached_mid_.data[i] > T(0))) dmid.data[i] = T(0);
  Tensor4<T> dx = conv1_.backward(bn1_.backward(dmid));

  if (proj_conv_) {
    Tensor4<T> ds = proj_conv_->backward(proj_bn_->backward(dz));
    for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += ds.data[i];
  } else {
    for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dz.data[i];
  }
  return dx;
}

template <typename T>
void ResidualBlock<T>::collect_params(std::vector<Param<T>*>& out) {
  // Main path first, then the projection shortcut; checkpoint order depends
  // on this staying fixed.
  conv1_.collect_params(out);
  bn1_.collect_params(out);
  conv2_.collect_params(out);
  bn2_.collect_params(out);
  if (proj_conv_) {
    proj_conv_->collect_params(out);
    proj_bn_->collect_params(out);
  }
}

// ------------------------------------------------------------------- losses

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor4<T>& logits,
                                    const std::vector<int>& labels) {
  const int k = logits.c * logits.h * logits.w;
  const int n = logits.n;
  if (n < 1) throw Error("softmax_cross_entropy: empty batch");
  if (static_cast<int>(labels.size()) != n)
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for batch of " + std::to_string(n));

  LossResult<T> res;
  res.probs.assign(static_cast<size_t>(n) * k, 0.0);
  res.dlogits = Tensor4<T>(logits.n, logits.c, logits.h, logits.w);

  double total = 0;
  for (int b = 0; b < n; ++b) {
    if (labels[b] < 0 || labels[b] >= k)
      throw Error("softmax_cross_entropy: label " + std::to_string(labels[b]) +
                  " out of range at row " + std::to_string(b));
    const T* in = logits.row(b, 0, 0);
    double mx = static_cast<double>(in[0]);
    for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(in[j]));
    double sum = 0;
    double* p = res.probs.data() + static_cast<size_t>(b) * k;
    for (int j = 0; j < k; ++j) {
      p[j] = std::exp(static_cast<double>(in[j]) - mx);
      sum += p[j];
    }
    T* d = res.dlogits.row(b, 0, 0);
    for (int j = 0; j < k; ++j) {
      p[j] /= sum;
      d[j] = static_cast<T>((p[j] - (j == labels[b] ? 1.0 : 0.0)) / n);
    }
    total -= std::log(p[labels[b]]);
  }
  res.loss = total / n;
  return res;
}

// --------------------------------------------------------------------- adam

template <typename T>
void AdamState<T>::attach(const std::vector<Param<T>*>& trainable) {
  m.clear();
  v.clear();
  for (const Param<T>* p : trainable) {
    m.emplace_back(p->value.size(), 0.0);
    v.emplace_back(p->value.size(), 0.0);
  }
  t = 0;
}

template <typename T>
void adam_step(const std::vector<Param<T>*>& trainable, AdamState<T>& state) {
  if (state.m.size() != trainable.size())
    throw ShapeError("adam_step: state tracks " +
                     std::to_string(state.m.size()) + " tensors, got " +
                     std::to_string(trainable.size()));
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < trainable.size(); ++i) {
    Param<T>& p = *trainable[i];
    if (state.m[i].size() != p.value.size())
      throw ShapeError("adam_step: moment size " +
                       std::to_string(state.m[i].size()) +
                       " does not match parameter " + p.name + " (" +
                       std::to_string(p.value.size()) + ")");
    for (size_t j = 0; j < p.value.size(); ++j) {
      double g = static_cast<double>(p.grad[j]);
      double& mj = state.m[i][j];
      double& vj = state.v[i][j];
      mj = state.beta1 * mj + (1.0 - state.beta1) * g;
      vj = state.beta2 * vj + (1.0 - state.beta2) * g * g;
      double update =
          state.lr * (mj / bc1) / (std::sqrt(vj / bc2) + state.eps);
      p.value[j] = static_cast<T>(static_cast<double>(p.value[j]) - update);
    }
  }
}

template class ConvLayer<float>;
template class ConvLayer<double>;
template class BatchNormLayer<float>;
template class BatchNormLayer<double>;
template class ReluLayer<float>;
template class ReluLayer<double>;
template class FlattenLayer<float>;
template class FlattenLayer<double>;
template class GlobalAvgPoolLayer<float>;
template class GlobalAvgPoolLayer<double>;
template class DenseLayer<float>;
template class DenseLayer<double>;
template class ResidualBlock<float>;
template class ResidualBlock<double>;

template Tensor4<float> relu(const Tensor4<float>&);
template Tensor4<double> relu(const Tensor4<double>&);
template LossResult<float> softmax_cross_entropy(const Tensor4<float>&,
                                                 const std::vector<int>&);
template LossResult<double> softmax_cross_entropy(const Tensor4<double>&,
                                                  const std::vector<int>&);
template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(const std::vector<Param<float>*>&, AdamState<float>&);
template void adam_step(const std::vector<Param<double>*>&,
                        AdamState<double>&);

}  // namespace mriq::nn
