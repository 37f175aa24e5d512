#include "psfed/segnet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "psfed/kernels.hpp"
#include "psfed/rng.hpp"

namespace psfed {

void NetSpec::validate() const {
  if (depth < 1) throw std::invalid_argument("NetSpec: depth must be >= 1");
  if (base_width < 1) throw std::invalid_argument("NetSpec: base_width must be >= 1");
  if (in_channels < 1) throw std::invalid_argument("NetSpec: in_channels must be >= 1");
  if (num_classes < 2) throw std::invalid_argument("NetSpec: num_classes must be >= 2");
}

bool ModelParams::same_layout(const ModelParams& o) const {
  if (flat.size() != o.flat.size() || layout.size() != o.layout.size()) return false;
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (layout[i].name != o.layout[i].name || layout[i].shape != o.layout[i].shape)
      return false;
  return true;
}

namespace {

int width_at(const NetSpec& s, int level) { return s.base_width << level; }

void push_conv(std::vector<TensorInfo>& layout, std::size_t& offset,
               const std::string& name, int cout, int k, int cin) {
  TensorInfo w{name + ".weight", {cout, k, k, cin}, offset,
               static_cast<std::size_t>(cout) * k * k * cin};
  offset += w.size;
  TensorInfo b{name + ".bias", {cout}, offset, static_cast<std::size_t>(cout)};
  offset += b.size;
  layout.push_back(std::move(w));
  layout.push_back(std::move(b));
}

std::vector<TensorInfo> build_layout(const NetSpec& s, std::size_t& encoder_end,
                                     std::size_t& total) {
  std::vector<TensorInfo> layout;
  std::size_t offset = 0;
  int cin = s.in_channels;
  for (int l = 0; l < s.depth; ++l) {
    const int w = width_at(s, l);
    push_conv(layout, offset, "enc" + std::to_string(l) + ".conv1", w, 3, cin);
    push_conv(layout, offset, "enc" + std::to_string(l) + ".conv2", w, 3, w);
    cin = w;
  }
  const int wb = width_at(s, s.depth);
  push_conv(layout, offset, "bottom.conv1", wb, 3, cin);
  push_conv(layout, offset, "bottom.conv2", wb, 3, wb);
  encoder_end = offset;

  int above = wb;
  for (int l = s.depth - 1; l >= 0; --l) {
    const int w = width_at(s, l);
    push_conv(layout, offset, "dec" + std::to_string(l) + ".conv1", w, 3, above + w);
    push_conv(layout, offset, "dec" + std::to_string(l) + ".conv2", w, 3, w);
    above = w;
  }
  push_conv(layout, offset, "head", s.num_classes, 1, s.base_width);
  total = offset;
  return layout;
}

// Weight/bias views for the i-th conv (two consecutive layout entries).
struct ConvRef {
  const double* w;
  const double* b;
  int cout, k, cin;
};

ConvRef conv_ref(const std::vector<double>& flat,
                 const std::vector<TensorInfo>& layout, std::size_t conv_idx) {
  const TensorInfo& wi = layout[2 * conv_idx];
  const TensorInfo& bi = layout[2 * conv_idx + 1];
  return {flat.data() + wi.offset, flat.data() + bi.offset, wi.shape[0],
          wi.shape[1], wi.shape[3]};
}

struct ConvGradRef {
  double* w;
  double* b;
};

ConvGradRef conv_grad_ref(std::vector<double>& flat,
                          const std::vector<TensorInfo>& layout,
                          std::size_t conv_idx) {
  const TensorInfo& wi = layout[2 * conv_idx];
  const TensorInfo& bi = layout[2 * conv_idx + 1];
  return {flat.data() + wi.offset, flat.data() + bi.offset};
}

void conv3x3_forward(const Field& in, const ConvRef& c, Field& out, bool relu_after) {
  const auto& K = kern::ops();
  const int h = in.height, w = in.width, cin = c.cin;
  for (int y = 0; y < h; ++y) {
    const int ky0 = y > 0 ? 0 : 1;
    const int ky1 = y < h - 1 ? 2 : 1;
    for (int x = 0; x < w; ++x) {
      const int kx0 = x > 0 ? 0 : 1;
      const int kx1 = x < w - 1 ? 2 : 1;
      const std::size_t span = static_cast<std::size_t>(kx1 - kx0 + 1) * cin;
      double* op = out.px(y, x);
      for (int co = 0; co < c.cout; ++co) {
        double acc = c.b[co];
        for (int ky = ky0; ky <= ky1; ++ky) {
          const double* ip = in.px(y + ky - 1, x + kx0 - 1);
          const double* wp = c.w + ((static_cast<std::size_t>(co) * 3 + ky) * 3 + kx0) * cin;
          acc += K.dot(ip, wp, span);
        }
        op[co] = acc;
      }
    }
  }
  if (relu_after) K.relu(out.data.data(), out.data.size());
}

// g_out must already be masked for the activation; accumulates into g_in
// (zero-initialized by the caller) and the weight/bias grads.
void conv3x3_backward(const Field& in, const ConvRef& c, const Field& g_out,
                      Field& g_in, const ConvGradRef& g) {
  const auto& K = kern::ops();
  const int h = in.height, w = in.width, cin = c.cin;
  for (int y = 0; y < h; ++y) {
    const int ky0 = y > 0 ? 0 : 1;
    const int ky1 = y < h - 1 ? 2 : 1;
    for (int x = 0; x < w; ++x) {
      const int kx0 = x > 0 ? 0 : 1;
      const int kx1 = x < w - 1 ? 2 : 1;
      const std::size_t span = static_cast<std::size_t>(kx1 - kx0 + 1) * cin;
      const double* gp = g_out.px(y, x);
      for (int co = 0; co < c.cout; ++co) {
        const double gv = gp[co];
        if (gv == 0.0) continue;
        g.b[co] += gv;
        for (int ky = ky0; ky <= ky1; ++ky) {
          const std::size_t woff =
              ((static_cast<std::size_t>(co) * 3 + ky) * 3 + kx0) * cin;
          K.axpy(gv, c.w + woff, g_in.px(y + ky - 1, x + kx0 - 1), span);
          K.axpy(gv, in.px(y + ky - 1, x + kx0 - 1), g.w + woff, span);
        }
      }
    }
  }
}

void conv1x1_forward(const Field& in, const ConvRef& c, Field& out) {
  const auto& K = kern::ops();
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      const double* ip = in.px(y, x);
      double* op = out.px(y, x);
      for (int co = 0; co < c.cout; ++co)
        op[co] = c.b[co] + K.dot(ip, c.w + static_cast<std::size_t>(co) * c.cin, c.cin);
    }
}

void conv1x1_backward(const Field& in, const ConvRef& c, const Field& g_out,
                      Field& g_in, const ConvGradRef& g) {
  const auto& K = kern::ops();
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      const double* gp = g_out.px(y, x);
      for (int co = 0; co < c.cout; ++co) {
        const double gv = gp[co];
        if (gv == 0.0) continue;
        g.b[co] += gv;
        K.axpy(gv, c.w + static_cast<std::size_t>(co) * c.cin, g_in.px(y, x), c.cin);
        K.axpy(gv, in.px(y, x), g.w + static_cast<std::size_t>(co) * c.cin, c.cin);
      }
    }
}

Field maxpool2_forward(const Field& in, std::vector<std::uint8_t>& arg) {
  Field out(in.height / 2, in.width / 2, in.channels);
  arg.assign(out.data.size(), 0);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      const double* i00 = in.px(2 * y, 2 * x);
      const double* i01 = in.px(2 * y, 2 * x + 1);
      const double* i10 = in.px(2 * y + 1, 2 * x);
      const double* i11 = in.px(2 * y + 1, 2 * x + 1);
      double* op = out.px(y, x);
      const std::size_t base =
          (static_cast<std::size_t>(y) * out.width + x) * in.channels;
      for (int ch = 0; ch < in.channels; ++ch) {
        // first maximum wins on ties
        double best = i00[ch];
        std::uint8_t which = 0;
        if (i01[ch] > best) { best = i01[ch]; which = 1; }
        if (i10[ch] > best) { best = i10[ch]; which = 2; }
        if (i11[ch] > best) { best = i11[ch]; which = 3; }
        op[ch] = best;
        arg[base + ch] = which;
      }
    }
  return out;
}

Field maxpool2_backward(const Field& g_out, const std::vector<std::uint8_t>& arg,
                        int in_h, int in_w) {
  Field g_in(in_h, in_w, g_out.channels);
  for (int y = 0; y < g_out.height; ++y)
    for (int x = 0; x < g_out.width; ++x) {
      const double* gp = g_out.px(y, x);
      const std::size_t base =
          (static_cast<std::size_t>(y) * g_out.width + x) * g_out.channels;
      for (int ch = 0; ch < g_out.channels; ++ch) {
        const std::uint8_t which = arg[base + ch];
        const int yy = 2 * y + (which >> 1);
        const int xx = 2 * x + (which & 1);
        g_in.px(yy, xx)[ch] += gp[ch];
      }
    }
  return g_in;
}

Field upsample2_forward(const Field& in) {
  Field out(in.height * 2, in.width * 2, in.channels);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      std::memcpy(out.px(y, x), in.px(y / 2, x / 2),
                  sizeof(double) * in.channels);
  return out;
}

Field upsample2_backward(const Field& g_out) {
  Field g_in(g_out.height / 2, g_out.width / 2, g_out.channels);
  for (int y = 0; y < g_out.height; ++y)
    for (int x = 0; x < g_out.width; ++x) {
      const double* gp = g_out.px(y, x);
      double* ip = g_in.px(y / 2, x / 2);
      for (int ch = 0; ch < g_out.channels; ++ch) ip[ch] += gp[ch];
    }
  return g_in;
}

// channel concat, a first
Field concat(const Field& a, const Field& b) {
  Field out(a.height, a.width, a.channels + b.channels);
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      double* op = out.px(y, x);
      std::memcpy(op, a.px(y, x), sizeof(double) * a.channels);
      std::memcpy(op + a.channels, b.px(y, x), sizeof(double) * b.channels);
    }
  return out;
}

}  // namespace

struct ForwardTape {
  Field input;
  std::vector<Field> enc_mid, enc_out, pooled;
  std::vector<std::vector<std::uint8_t>> pool_arg;
  Field bottom_mid, bottom_out;
  std::vector<Field> dec_in, dec_mid, dec_out;
  LogitField logits;
};

ModelParams init_params(const NetSpec& spec) {
  spec.validate();
  ModelParams p;
  p.spec = spec;
  std::size_t encoder_end = 0, total = 0;
  p.layout = build_layout(spec, encoder_end, total);
  p.flat.assign(total, 0.0);
  p.encoder_ranges = {{0, encoder_end}};
  p.decoder_ranges = {{encoder_end, total}};

  Rng rng(spec.seed);
  for (const TensorInfo& t : p.layout) {
    if (t.shape.size() != 4) continue;  // biases stay zero
    // He-uniform: keeps activation variance stable through the ReLU stack
    const double fan_in = static_cast<double>(t.shape[1]) * t.shape[2] * t.shape[3];
    const double bound = std::sqrt(6.0 / fan_in);
    for (std::size_t i = 0; i < t.size; ++i)
      p.flat[t.offset + i] = rng.uniform(-bound, bound);
  }
  return p;
}

namespace {

void check_image(const ModelParams& params, const Field& image) {
  const NetSpec& s = params.spec;
  if (image.channels != s.in_channels)
    throw std::invalid_argument("forward: image channel mismatch");
  const int div = 1 << s.depth;
  if (image.height % div != 0 || image.width % div != 0 || image.height == 0)
    throw std::invalid_argument("forward: image sides must be divisible by 2^depth");
}

std::shared_ptr<ForwardTape> run_forward(const ModelParams& params, const Field& image) {
  check_image(params, image);
  const NetSpec& s = params.spec;
  auto tape = std::make_shared<ForwardTape>();
  tape->input = image;
  tape->enc_mid.resize(s.depth);
  tape->enc_out.resize(s.depth);
  tape->pooled.resize(s.depth);
  tape->pool_arg.resize(s.depth);
  tape->dec_in.resize(s.depth);
  tape->dec_mid.resize(s.depth);
  tape->dec_out.resize(s.depth);

  std::size_t ci = 0;  // conv index in layout order
  const Field* cur = &tape->input;
  for (int l = 0; l < s.depth; ++l) {
    const ConvRef c1 = conv_ref(params.flat, params.layout, ci++);
    tape->enc_mid[l] = Field(cur->height, cur->width, c1.cout);
    conv3x3_forward(*cur, c1, tape->enc_mid[l], true);
    const ConvRef c2 = conv_ref(params.flat, params.layout, ci++);
    tape->enc_out[l] = Field(cur->height, cur->width, c2.cout);
    conv3x3_forward(tape->enc_mid[l], c2, tape->enc_out[l], true);
    tape->pooled[l] = maxpool2_forward(tape->enc_out[l], tape->pool_arg[l]);
    cur = &tape->pooled[l];
  }

  const ConvRef b1 = conv_ref(params.flat, params.layout, ci++);
  tape->bottom_mid = Field(cur->height, cur->width, b1.cout);
  conv3x3_forward(*cur, b1, tape->bottom_mid, true);
  const ConvRef b2 = conv_ref(params.flat, params.layout, ci++);
  tape->bottom_out = Field(cur->height, cur->width, b2.cout);
  conv3x3_forward(tape->bottom_mid, b2, tape->bottom_out, true);

  const Field* above = &tape->bottom_out;
  for (int l = s.depth - 1; l >= 0; --l) {
    tape->dec_in[l] = concat(upsample2_forward(*above), tape->enc_out[l]);
    const ConvRef c1 = conv_ref(params.flat, params.layout, ci++);
    tape->dec_mid[l] = Field(tape->dec_in[l].height, tape->dec_in[l].width, c1.cout);
    conv3x3_forward(tape->dec_in[l], c1, tape->dec_mid[l], true);
    const ConvRef c2 = conv_ref(params.flat, params.layout, ci++);
    tape->dec_out[l] = Field(tape->dec_mid[l].height, tape->dec_mid[l].width, c2.cout);
    conv3x3_forward(tape->dec_mid[l], c2, tape->dec_out[l], true);
    above = &tape->dec_out[l];
  }

  const ConvRef head = conv_ref(params.flat, params.layout, ci++);
  tape->logits = Field(image.height, image.width, head.cout);
  conv1x1_forward(tape->dec_out[0], head, tape->logits);
  return tape;
}

}  // namespace

LogitField forward(const ModelParams& params, const Field& image) {
  return run_forward(params, image)->logits;
}

ForwardResult forward_with_tape(const ModelParams& params, const Field& image) {
  auto tape = run_forward(params, image);
  return {tape->logits, tape};
}

std::vector<double> backward_from_tape(const ModelParams& params,
                                       const ForwardTape& tape,
                                       const Field& upstream) {
  const NetSpec& s = params.spec;
  if (!upstream.same_shape(tape.logits))
    throw std::invalid_argument("backward: upstream shape mismatch");
  const auto& K = kern::ops();
  std::vector<double> grad(params.flat.size(), 0.0);

  // conv indices in layout order
  const std::size_t n_enc_convs = static_cast<std::size_t>(s.depth) * 2 + 2;
  const std::size_t head_idx = n_enc_convs + static_cast<std::size_t>(s.depth) * 2;
  auto dec_conv_idx = [&](int level, int which) {
    // dec levels were laid out from depth-1 down to 0
    return n_enc_convs + static_cast<std::size_t>(s.depth - 1 - level) * 2 + which;
  };

  // head
  const ConvRef head = conv_ref(params.flat, params.layout, head_idx);
  Field g_above(tape.dec_out[0].height, tape.dec_out[0].width, tape.dec_out[0].channels);
  conv1x1_backward(tape.dec_out[0], head, upstream, g_above,
                   conv_grad_ref(grad, params.layout, head_idx));

  std::vector<Field> g_enc_out(s.depth);
  for (int l = 0; l < s.depth; ++l)
    g_enc_out[l] = Field(tape.enc_out[l].height, tape.enc_out[l].width,
                         tape.enc_out[l].channels);

  Field g_bottom_out;
  for (int l = 0; l < s.depth; ++l) {
    K.relu_backward(tape.dec_out[l].data.data(), g_above.data.data(),
                    g_above.data.size());
    const ConvRef c2 = conv_ref(params.flat, params.layout, dec_conv_idx(l, 1));
    Field g_mid(tape.dec_mid[l].height, tape.dec_mid[l].width, tape.dec_mid[l].channels);
    conv3x3_backward(tape.dec_mid[l], c2, g_above, g_mid,
                     conv_grad_ref(grad, params.layout, dec_conv_idx(l, 1)));
    K.relu_backward(tape.dec_mid[l].data.data(), g_mid.data.data(), g_mid.data.size());
    const ConvRef c1 = conv_ref(params.flat, params.layout, dec_conv_idx(l, 0));
    Field g_in(tape.dec_in[l].height, tape.dec_in[l].width, tape.dec_in[l].channels);
    conv3x3_backward(tape.dec_in[l], c1, g_mid, g_in,
                     conv_grad_ref(grad, params.layout, dec_conv_idx(l, 0)));

    // split concat: first channels go up the decoder, the rest to the skip
    const int up_ch = g_in.channels - tape.enc_out[l].channels;
    Field g_up(g_in.height, g_in.width, up_ch);
    for (int y = 0; y < g_in.height; ++y)
      for (int x = 0; x < g_in.width; ++x) {
        const double* gp = g_in.px(y, x);
        std::memcpy(g_up.px(y, x), gp, sizeof(double) * up_ch);
        double* gs = g_enc_out[l].px(y, x);
        for (int ch = 0; ch < tape.enc_out[l].channels; ++ch)
          gs[ch] += gp[up_ch + ch];
      }
    Field g_lower = upsample2_backward(g_up);
    if (l == s.depth - 1)
      g_bottom_out = std::move(g_lower);
    else
      g_above = std::move(g_lower);
  }

  // bottom block
  const std::size_t bot1 = static_cast<std::size_t>(s.depth) * 2;
  K.relu_backward(tape.bottom_out.data.data(), g_bottom_out.data.data(),
                  g_bottom_out.data.size());
  const ConvRef b2 = conv_ref(params.flat, params.layout, bot1 + 1);
  Field g_bmid(tape.bottom_mid.height, tape.bottom_mid.width, tape.bottom_mid.channels);
  conv3x3_backward(tape.bottom_mid, b2, g_bottom_out, g_bmid,
                   conv_grad_ref(grad, params.layout, bot1 + 1));
  K.relu_backward(tape.bottom_mid.data.data(), g_bmid.data.data(), g_bmid.data.size());
  const ConvRef b1 = conv_ref(params.flat, params.layout, bot1);
  const Field& bottom_in = tape.pooled[s.depth - 1];
  Field g_pooled(bottom_in.height, bottom_in.width, bottom_in.channels);
  conv3x3_backward(bottom_in, b1, g_bmid, g_pooled,
                   conv_grad_ref(grad, params.layout, bot1));

  // encoder blocks, deepest first; pooled-path grads join the skip grads
  Field g_pool_path = std::move(g_pooled);
  for (int l = s.depth - 1; l >= 0; --l) {
    {
      Field unpooled = maxpool2_backward(g_pool_path, tape.pool_arg[l],
                                         tape.enc_out[l].height, tape.enc_out[l].width);
      for (std::size_t i = 0; i < unpooled.data.size(); ++i)
        g_enc_out[l].data[i] += unpooled.data[i];
    }
    K.relu_backward(tape.enc_out[l].data.data(), g_enc_out[l].data.data(),
                    g_enc_out[l].data.size());
    const std::size_t e1 = static_cast<std::size_t>(l) * 2;
    const ConvRef c2 = conv_ref(params.flat, params.layout, e1 + 1);
    Field g_mid(tape.enc_mid[l].height, tape.enc_mid[l].width, tape.enc_mid[l].channels);
    conv3x3_backward(tape.enc_mid[l], c2, g_enc_out[l], g_mid,
                     conv_grad_ref(grad, params.layout, e1 + 1));
    K.relu_backward(tape.enc_mid[l].data.data(), g_mid.data.data(), g_mid.data.size());
    const ConvRef c1 = conv_ref(params.flat, params.layout, e1);
    const Field& block_in = l == 0 ? tape.input : tape.pooled[l - 1];
    Field g_in(block_in.height, block_in.width, block_in.channels);
    conv3x3_backward(block_in, c1, g_mid, g_in,
                     conv_grad_ref(grad, params.layout, e1));
    if (l > 0) g_pool_path = std::move(g_in);
  }
  return grad;
}

std::vector<double> backward(const ModelParams& params, const Field& image,
                             const Field& upstream) {
  const auto tape = run_forward(params, image);
  return backward_from_tape(params, *tape, upstream);
}

void sgd_step(ModelParams& params, const std::vector<double>& grad, double lr,
              const IndexRanges* freeze) {
  if (grad.size() != params.flat.size())
    throw std::invalid_argument("sgd_step: gradient size mismatch");
  const auto& K = kern::ops();
  if (freeze == nullptr || freeze->empty()) {
    K.axpy(-lr, grad.data(), params.flat.data(), params.flat.size());
    return;
  }
  // apply only outside the (sorted, disjoint) frozen ranges
  std::size_t pos = 0;
  for (const auto& [begin, end] : *freeze) {
    if (begin > pos)
      K.axpy(-lr, grad.data() + pos, params.flat.data() + pos, begin - pos);
    pos = end;
  }
  if (pos < params.flat.size())
    K.axpy(-lr, grad.data() + pos, params.flat.data() + pos,
           params.flat.size() - pos);
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  nlohmann::json header;
  header["in_channels"] = params.spec.in_channels;
  header["base_width"] = params.spec.base_width;
  header["depth"] = params.spec.depth;
  header["num_classes"] = params.spec.num_classes;
  header["seed"] = params.spec.seed;
  header["param_count"] = params.flat.size();
  const std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out.write("PSFEDCKPT1\n", 11);
  const std::uint32_t hlen = static_cast<std::uint32_t>(htext.size());
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  std::vector<float> f32(params.flat.begin(), params.flat.end());
  out.write(reinterpret_cast<const char*>(f32.data()),
            static_cast<std::streamsize>(f32.size() * sizeof(float)));
  if (!out) throw std::runtime_error("short write on checkpoint: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path.string());
  char magic[11];
  in.read(magic, 11);
  if (!in || std::memcmp(magic, "PSFEDCKPT1\n", 11) != 0)
    throw std::runtime_error("bad checkpoint magic: " + path.string());
  std::uint32_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htext(hlen, '\0');
  in.read(htext.data(), hlen);
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path.string());
  const auto header = nlohmann::json::parse(htext);

  NetSpec spec;
  spec.in_channels = header.at("in_channels").get<int>();
  spec.base_width = header.at("base_width").get<int>();
  spec.depth = header.at("depth").get<int>();
  spec.num_classes = header.at("num_classes").get<int>();
  spec.seed = header.at("seed").get<std::uint64_t>();

  ModelParams params = init_params(spec);
  const auto count = header.at("param_count").get<std::size_t>();
  if (count != params.flat.size())
    throw std::runtime_error("checkpoint parameter count mismatch: " + path.string());
  std::vector<float> f32(count);
  in.read(reinterpret_cast<char*>(f32.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw std::runtime_error("truncated checkpoint payload: " + path.string());
  for (std::size_t i = 0; i < count; ++i) params.flat[i] = f32[i];
  return params;
}

}  // namespace psfed
