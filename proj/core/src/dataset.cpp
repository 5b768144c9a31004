#include "gccn/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>

#include "gccn/error.hpp"

namespace gccn {

std::size_t Dataset::num_classes() const {
  int top = -1;
  for (int y : labels) top = std::max(top, y);
  return static_cast<std::size_t>(top + 1);
}

void Dataset::validate() const {
  if (images.size() != labels.size()) {
    throw DataError("dataset has " + std::to_string(images.size()) + " images but " +
                    std::to_string(labels.size()) + " labels");
  }
  const Shape expected = image_shape();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].shape() != expected) {
      throw DataError("image " + std::to_string(i) + " has shape " + shape_string(images[i].shape()) +
                      ", expected " + shape_string(expected));
    }
  }
  const std::size_t c = num_classes();
  std::vector<std::size_t> counts(c, 0);
  for (int y : labels) {
    if (y < 0) throw DataError("negative label " + std::to_string(y));
    ++counts[static_cast<std::size_t>(y)];
  }
  for (std::size_t k = 0; k < c; ++k) {
    if (counts[k] == 0) throw DataError("labels are not dense: class " + std::to_string(k) + " is empty");
  }
  if (!class_names.empty() && class_names.size() != c) {
    throw DataError("dataset has " + std::to_string(class_names.size()) + " class names for " +
                    std::to_string(c) + " classes");
  }
}

Tensor Dataset::batch(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw DataError("empty batch");
  const std::size_t per = height * width * channels;
  Tensor out(Shape{indices.size(), height, width, channels});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Tensor& img = images.at(indices[i]);
    std::copy_n(img.data().data(), per, &out[i * per]);
  }
  return out;
}

std::vector<std::vector<std::size_t>> Dataset::indices_by_class() const {
  std::vector<std::vector<std::size_t>> out(num_classes());
  for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<std::size_t>(labels[i])].push_back(i);
  return out;
}

// ---- IDX -------------------------------------------------------------------

namespace {

class ByteReader {
 public:
  ByteReader(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  std::uint32_t u32_be(const char* what) {
    require(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes_[offset_ + i]);
    offset_ += 4;
    return v;
  }

  const char* take(std::size_t n, const char* what) {
    require(n, what);
    const char* p = bytes_.data() + offset_;
    offset_ += n;
    return p;
  }

 private:
  void require(std::size_t n, const char* what) {
    if (offset_ + n > bytes_.size()) {
      throw IoError(path_.string() + ": truncated while reading " + what + " at byte offset " +
                    std::to_string(offset_) + " (file has " + std::to_string(bytes_.size()) + " bytes)");
    }
  }

  std::filesystem::path path_;
  std::vector<char> bytes_;
  std::size_t offset_ = 0;
};

void put_u32_be(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                              static_cast<char>(v)};
  out.write(b.data(), 4);
}

std::string hex32(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  ByteReader img(images_path);
  const std::uint32_t magic = img.u32_be("image magic");
  if (magic != kIdxImagesMagic) {
    throw FormatError(images_path.string() + ": image magic " + hex32(magic) + ", expected " + hex32(kIdxImagesMagic));
  }
  const std::uint32_t count = img.u32_be("image count");
  const std::uint32_t rows = img.u32_be("row count");
  const std::uint32_t cols = img.u32_be("column count");
  if (rows == 0 || cols == 0) throw FormatError(images_path.string() + ": zero image dimension");

  ByteReader lab(labels_path);
  const std::uint32_t lmagic = lab.u32_be("label magic");
  if (lmagic != kIdxLabelsMagic) {
    throw FormatError(labels_path.string() + ": label magic " + hex32(lmagic) + ", expected " + hex32(kIdxLabelsMagic));
  }
  const std::uint32_t lcount = lab.u32_be("label count");
  if (lcount != count) {
    throw DataError("image file holds " + std::to_string(count) + " images but label file holds " +
                    std::to_string(lcount) + " labels");
  }

  Dataset ds;
  ds.height = rows;
  ds.width = cols;
  ds.channels = 1;
  ds.images.reserve(count);
  ds.labels.reserve(count);
  const std::size_t per = static_cast<std::size_t>(rows) * cols;
  for (std::uint32_t i = 0; i < count; ++i) {
    const char* px = img.take(per, "pixels");
    Tensor t(Shape{rows, cols, 1});
    for (std::size_t p = 0; p < per; ++p) t[p] = static_cast<unsigned char>(px[p]) / 255.0;
    ds.images.push_back(std::move(t));
  }
  const char* ys = lab.take(count, "labels");
  for (std::uint32_t i = 0; i < count; ++i) ds.labels.push_back(static_cast<unsigned char>(ys[i]));
  ds.validate();
  return ds;
}

void write_idx(const Dataset& dataset, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  dataset.validate();
  if (dataset.channels != 1) throw DataError("IDX images must have one channel");
  if (dataset.num_classes() > 256) throw DataError("IDX labels hold at most 256 classes");

  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot write " + images_path.string());
  put_u32_be(img, kIdxImagesMagic);
  put_u32_be(img, static_cast<std::uint32_t>(dataset.size()));
  put_u32_be(img, static_cast<std::uint32_t>(dataset.height));
  put_u32_be(img, static_cast<std::uint32_t>(dataset.width));
  std::vector<char> px(dataset.height * dataset.width);
  for (const auto& t : dataset.images) {
    for (std::size_t p = 0; p < px.size(); ++p) {
      const double v = t[p];
      if (!(v >= 0.0 && v <= 1.0)) throw DataError("IDX pixel value outside [0,1]: " + std::to_string(v));
      px[p] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    img.write(px.data(), static_cast<std::streamsize>(px.size()));
  }
  if (!img) throw IoError("write failed: " + images_path.string());

  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot write " + labels_path.string());
  put_u32_be(lab, kIdxLabelsMagic);
  put_u32_be(lab, static_cast<std::uint32_t>(dataset.size()));
  for (int y : dataset.labels) lab.put(static_cast<char>(static_cast<unsigned char>(y)));
  if (!lab) throw IoError("write failed: " + labels_path.string());
}

Dataset load_raw_directory(const std::filesystem::path& root, std::size_t height, std::size_t width) {
  namespace fs = std::filesystem;
  if (height == 0 || width == 0) throw ConfigError("raw images need positive height and width");
  if (!fs::is_directory(root)) throw IoError(root.string() + " is not a directory");
  std::vector<fs::path> classes;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) classes.push_back(e.path());
  }
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) throw DataError(root.string() + " has no class subdirectories");
  Dataset ds;
  ds.height = height;
  ds.width = width;
  const std::size_t bytes = height * width;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(classes[k])) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("class directory " + classes[k].string() + " holds no images");
    for (const auto& f : files) {
      if (fs::file_size(f) != bytes) {
        throw DataError(f.string() + " holds " + std::to_string(fs::file_size(f)) + " bytes, expected " +
                        std::to_string(bytes));
      }
      std::ifstream in(f, std::ios::binary);
      std::vector<unsigned char> raw(bytes);
      if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes))) {
        throw IoError("cannot read " + f.string());
      }
      Tensor img(Shape{height, width, 1});
      for (std::size_t i = 0; i < bytes; ++i) img[i] = static_cast<double>(raw[i]) / 255.0;
      ds.images.push_back(std::move(img));
      ds.labels.push_back(static_cast<int>(k));
    }
    ds.class_names.push_back(classes[k].filename().string());
  }
  return ds;
}

std::filesystem::path idx_images_path(const std::string& prefix) { return prefix + "-images-idx3-ubyte"; }

std::filesystem::path idx_labels_path(const std::string& prefix) { return prefix + "-labels-idx1-ubyte"; }

// ---- glyphs ----------------------------------------------------------------

namespace {

struct Point {
  double x, y;
};

using Stroke = std::vector<Point>;

double segment_distance(Point p, Point a, Point b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

Point rotate_quarter(Point p, int quarters, double centre) {
  for (int q = 0; q < quarters; ++q) p = {centre - (p.y - centre), centre + (p.x - centre)};
  return p;
}

}  // namespace

Dataset gen_synthetic_glyphs(const GlyphOptions& options) {
  if (options.num_classes < 2) throw ConfigError("glyphs: need at least 2 classes");
  if (options.samples_per_class < 1) throw ConfigError("glyphs: need at least 1 sample per class");
  if (options.size < 16) throw ConfigError("glyphs: size must be at least 16");
  if (options.noise < 0.0 || options.jitter < 0.0) throw ConfigError("glyphs: noise and jitter must be non-negative");

  Rng rng(options.seed);
  const double s = static_cast<double>(options.size);
  const double centre = (s - 1.0) / 2.0;
  const double half_width = std::max(0.75, s / 32.0);

  struct Skeleton {
    std::vector<Stroke> strokes;
    int quarters;
  };
  std::vector<Skeleton> skeletons;
  for (std::size_t k = 0; k < options.num_classes; ++k) {
    Skeleton sk;
    const std::size_t n_strokes = 1 + rng.index(2);
    for (std::size_t st = 0; st < n_strokes; ++st) {
      Stroke stroke;
      const std::size_t n_vertices = (st == 0 ? 4 : 2) + rng.index(3);
      for (std::size_t v = 0; v < n_vertices; ++v) {
        stroke.push_back({rng.uniform(0.2 * s, 0.8 * s), rng.uniform(0.2 * s, 0.8 * s)});
      }
      sk.strokes.push_back(std::move(stroke));
    }
    sk.quarters = static_cast<int>(rng.index(4));
    skeletons.push_back(std::move(sk));
  }

  Dataset ds;
  ds.height = options.size;
  ds.width = options.size;
  ds.channels = 1;
  for (std::size_t k = 0; k < options.num_classes; ++k) ds.class_names.push_back("glyph_" + std::to_string(k));

  const double j = options.jitter;
  for (std::size_t k = 0; k < options.num_classes; ++k) {
    for (std::size_t n = 0; n < options.samples_per_class; ++n) {
      const Point shift = j > 0.0 ? Point{rng.uniform(-j, j), rng.uniform(-j, j)} : Point{0.0, 0.0};
      std::vector<Stroke> strokes = skeletons[k].strokes;
      for (auto& stroke : strokes) {
        for (auto& p : stroke) {
          if (j > 0.0) {
            p.x += rng.uniform(-j, j);
            p.y += rng.uniform(-j, j);
          }
          p = rotate_quarter({p.x + shift.x, p.y + shift.y}, skeletons[k].quarters, centre);
        }
      }
      Tensor img(Shape{options.size, options.size, 1}, 0.0);
      for (std::size_t r = 0; r < options.size; ++r) {
        for (std::size_t c = 0; c < options.size; ++c) {
          const Point px{static_cast<double>(c), static_cast<double>(r)};
          double d = 1e300;
          for (const auto& stroke : strokes) {
            for (std::size_t v = 0; v + 1 < stroke.size(); ++v) d = std::min(d, segment_distance(px, stroke[v], stroke[v + 1]));
          }
          double value = std::clamp(half_width + 0.5 - d, 0.0, 1.0);
          if (options.noise > 0.0) value += rng.normal(0.0, options.noise);
          value = std::clamp(value, 0.0, 1.0);
          img[r * options.size + c] = static_cast<double>(std::lround(value * 255.0)) / 255.0;
        }
      }
      ds.images.push_back(std::move(img));
      ds.labels.push_back(static_cast<int>(k));
    }
  }
  return ds;
}

Separability class_separability(const Dataset& dataset) {
  double inter = 0.0, intra = 0.0;
  std::size_t n_inter = 0, n_intra = 0;
  for (std::size_t a = 0; a < dataset.size(); ++a) {
    for (std::size_t b = a + 1; b < dataset.size(); ++b) {
      double d = 0.0;
      const Tensor& x = dataset.images[a];
      const Tensor& y = dataset.images[b];
      for (std::size_t p = 0; p < x.size(); ++p) d += (x[p] - y[p]) * (x[p] - y[p]);
      d = std::sqrt(d);
      if (dataset.labels[a] == dataset.labels[b]) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  }
  return {n_inter ? inter / static_cast<double>(n_inter) : 0.0, n_intra ? intra / static_cast<double>(n_intra) : 0.0};
}

// ---- splits ----------------------------------------------------------------

namespace {

Dataset subset(const Dataset& src, const std::vector<std::size_t>& indices, const std::vector<int>& relabel,
               const std::vector<std::string>& names) {
  Dataset out;
  out.height = src.height;
  out.width = src.width;
  out.channels = src.channels;
  out.class_names = names;
  for (auto i : indices) {
    out.images.push_back(src.images[i]);
    out.labels.push_back(relabel[static_cast<std::size_t>(src.labels[i])]);
  }
  return out;
}

std::string class_name(const Dataset& ds, std::size_t k) {
  return ds.class_names.empty() ? "class_" + std::to_string(k) : ds.class_names[k];
}

}  // namespace

std::pair<Dataset, Dataset> split_classes(const Dataset& dataset, double train_fraction, Rng& rng) {
  dataset.validate();
  const std::size_t c = dataset.num_classes();
  if (c < 2) throw ConfigError("split_classes: need at least 2 classes");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("split_classes: train fraction must lie strictly between 0 and 1");
  }
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(c)));
  if (n_train == 0 || n_train == c) {
    throw ConfigError("split_classes: fraction " + std::to_string(train_fraction) + " of " + std::to_string(c) +
                      " classes leaves one side empty");
  }
  std::vector<std::size_t> order(c);
  for (std::size_t k = 0; k < c; ++k) order[k] = k;
  rng.shuffle(order);
  std::vector<std::size_t> train_classes(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_classes(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train_classes.begin(), train_classes.end());
  std::sort(test_classes.begin(), test_classes.end());

  auto build = [&](const std::vector<std::size_t>& classes) {
    std::vector<int> relabel(c, -1);
    std::vector<std::string> names;
    for (std::size_t r = 0; r < classes.size(); ++r) {
      relabel[classes[r]] = static_cast<int>(r);
      names.push_back(class_name(dataset, classes[r]));
    }
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (relabel[static_cast<std::size_t>(dataset.labels[i])] >= 0) indices.push_back(i);
    }
    return subset(dataset, indices, relabel, names);
  };
  return {build(train_classes), build(test_classes)};
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& dataset, double holdout_fraction, Rng& rng) {
  dataset.validate();
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw ConfigError("split_holdout: holdout fraction must lie strictly between 0 and 1");
  }
  const auto by_class = dataset.indices_by_class();
  std::vector<std::size_t> train, held;
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    auto idx = by_class[k];
    const auto n_hold = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(idx.size())));
    if (n_hold == 0 || n_hold == idx.size()) {
      throw ConfigError("split_holdout: class " + std::to_string(k) + " with " + std::to_string(idx.size()) +
                        " samples cannot be split at fraction " + std::to_string(holdout_fraction));
    }
    rng.shuffle(idx);
    held.insert(held.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_hold));
    train.insert(train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_hold), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(held.begin(), held.end());
  std::vector<int> identity(by_class.size());
  std::vector<std::string> names;
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    identity[k] = static_cast<int>(k);
    names.push_back(class_name(dataset, k));
  }
  return {subset(dataset, train, identity, names), subset(dataset, held, identity, names)};
}

}  // namespace gccn
