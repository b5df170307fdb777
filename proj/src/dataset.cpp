#include "r2f/dataset.hpp"

#include <fstream>

#include "r2f/rng.hpp"
#include "r2f/util.hpp"

namespace r2f {

namespace {

uint32_t read_u32be(std::istream& in, const char* what) {
  uint8_t b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw DecodeError(std::string("truncated IDX header reading ") + what);
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) |
         (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

void write_u32be(std::ostream& out, uint32_t v) {
  uint8_t b[4] = {uint8_t(v >> 24), uint8_t(v >> 16), uint8_t(v >> 8),
                  uint8_t(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

constexpr uint32_t kImagesMagic = 0x00000803;  // u8 elements, 3 dims
constexpr uint32_t kLabelsMagic = 0x00000801;  // u8 elements, 1 dim

}  // namespace

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  std::ifstream imf(images_path, std::ios::binary);
  if (!imf) throw ConfigError("cannot open images file " + images_path);
  uint32_t magic = read_u32be(imf, "images magic");
  if (magic != kImagesMagic)
    throw DecodeError("images magic " + std::to_string(magic) +
                      ", expected 2051");
  uint32_t n = read_u32be(imf, "count");
  uint32_t h = read_u32be(imf, "rows");
  uint32_t w = read_u32be(imf, "cols");
  if (n == 0 || h == 0 || w == 0 || h > 4096 || w > 4096)
    throw DecodeError("implausible IDX dims n=" + std::to_string(n) + " h=" +
                      std::to_string(h) + " w=" + std::to_string(w));
  Dataset d;
  d.images = TensorQ(Shape{int(n), 1, int(h), int(w)});
  std::vector<uint8_t> raw(size_t(n) * h * w);
  if (!imf.read(reinterpret_cast<char*>(raw.data()), raw.size()))
    throw DecodeError("truncated IDX pixel data in " + images_path);
  for (size_t i = 0; i < raw.size(); ++i)
    d.images.data[i] = static_cast<int8_t>(int(raw[i]) - 128);

  std::ifstream lbf(labels_path, std::ios::binary);
  if (!lbf) throw ConfigError("cannot open labels file " + labels_path);
  magic = read_u32be(lbf, "labels magic");
  if (magic != kLabelsMagic)
    throw DecodeError("labels magic " + std::to_string(magic) +
                      ", expected 2049");
  uint32_t ln = read_u32be(lbf, "label count");
  if (ln != n)
    throw DecodeError("label count " + std::to_string(ln) + " vs " +
                      std::to_string(n) + " images");
  std::vector<uint8_t> lraw(ln);
  if (!lbf.read(reinterpret_cast<char*>(lraw.data()), lraw.size()))
    throw DecodeError("truncated IDX label data in " + labels_path);
  d.labels.assign(lraw.begin(), lraw.end());
  int mx = 0;
  for (uint16_t l : d.labels) mx = std::max(mx, int(l));
  d.classes = mx + 1;
  return d;
}

void save_idx(const Dataset& d, const std::string& images_path,
              const std::string& labels_path) {
  std::ofstream imf(images_path, std::ios::binary);
  if (!imf) throw ConfigError("cannot write images file " + images_path);
  write_u32be(imf, kImagesMagic);
  write_u32be(imf, uint32_t(d.images.shape.n));
  write_u32be(imf, uint32_t(d.images.shape.h));
  write_u32be(imf, uint32_t(d.images.shape.w));
  for (int8_t q : d.images.data) {
    uint8_t p = static_cast<uint8_t>(int(q) + 128);
    imf.write(reinterpret_cast<char*>(&p), 1);
  }
  std::ofstream lbf(labels_path, std::ios::binary);
  if (!lbf) throw ConfigError("cannot write labels file " + labels_path);
  write_u32be(lbf, kLabelsMagic);
  write_u32be(lbf, uint32_t(d.labels.size()));
  for (uint16_t l : d.labels) {
    uint8_t b = static_cast<uint8_t>(l);
    lbf.write(reinterpret_cast<char*>(&b), 1);
  }
}

Dataset synth_dataset(size_t n, uint64_t seed, int classes, int hw) {
  if (classes < 2 || hw < 8)
    throw ConfigError("synthetic set needs >= 2 classes and hw >= 8");
  Dataset d;
  d.classes = classes;
  d.images = TensorQ(Shape{int(n), 1, hw, hw});
  d.labels.resize(n);
  const int span = hw - 3;  // band anchor range so a 3-wide band fits
  for (size_t i = 0; i < n; ++i) {
    Rng rng(mix_key(seed, i));
    int c = int(i % size_t(classes));
    d.labels[i] = static_cast<uint16_t>(c);
    // Class-specific band anchors, spread over the image.
    int r0 = int((uint64_t(c) * 2 + 1) % uint64_t(span));
    int c0 = int((uint64_t(span) - 1 - uint64_t(c) * 2 % uint64_t(span)) %
                 uint64_t(span));
    r0 = std::min(std::max(r0 + int(rng.next_below(3)) - 1, 0), span - 1);
    c0 = std::min(std::max(c0 + int(rng.next_below(3)) - 1, 0), span - 1);
    int8_t* px = d.images.data.data() + i * size_t(hw) * hw;
    for (int y = 0; y < hw; ++y)
      for (int x = 0; x < hw; ++x) {
        int v = 20 + int(rng.next_below(41));  // background noise 20..60
        bool band = (y >= r0 && y < r0 + 3) || (x >= c0 && x < c0 + 3);
        if (band) v = 170 + int(rng.next_below(61));  // bright 170..230
        px[y * hw + x] = static_cast<int8_t>(v - 128);
      }
  }
  return d;
}

Dataset slice(const Dataset& d, size_t start, size_t count) {
  if (start + count > d.size())
    throw ConfigError("slice [" + std::to_string(start) + ", " +
                      std::to_string(start + count) + ") past dataset of " +
                      std::to_string(d.size()));
  Dataset out;
  out.classes = d.classes;
  out.images = batch_images(d, start, count);
  out.labels = batch_labels(d, start, count);
  return out;
}

TensorQ batch_images(const Dataset& d, size_t start, size_t count) {
  const Shape s = d.images.shape;
  const size_t row = size_t(s.c) * s.h * s.w;
  TensorQ out(Shape{int(count), s.c, s.h, s.w});
  std::copy(d.images.data.begin() + start * row,
            d.images.data.begin() + (start + count) * row, out.data.begin());
  return out;
}

std::vector<uint16_t> batch_labels(const Dataset& d, size_t start,
                                   size_t count) {
  return std::vector<uint16_t>(d.labels.begin() + start,
                               d.labels.begin() + start + count);
}

}  // namespace r2f
