// Copyright 2026 The ptychotile Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
#include "ptychotile/datastore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "ptychotile/error.hpp"

namespace ptychotile {
namespace {

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    using U = std::make_unsigned_t<T>;
    U u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bytes_.push_back(static_cast<std::uint8_t>(u & 0xff));
      u = static_cast<U>(u >> 8);
    }
  }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  void put_magic(const char* m) { bytes_.insert(bytes_.end(), m, m + 4); }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::size_t size() const { return bytes_.size(); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u = static_cast<U>(u | static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i)));
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  bool magic_is(const char* m) {
    if (bytes_.size() < 4 || std::memcmp(bytes_.data(), m, 4) != 0) return false;
    pos_ = 4;
    return true;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw TruncatedFile("unexpected end of file");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& b) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
  if (!out) throw IoError("write failed: " + path);
}

std::ofstream open_text(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

void require_congruent(const Volume& a, const Volume& b) {
  if (a.data.slices() != b.data.slices() || !(a.data.region() == b.data.region()) ||
      a.data.size() != b.data.size()) {
    throw ShapeMismatch("volumes are not congruent");
  }
}

}  // namespace

Volume make_phantom(int slices, Extent extent, double pitch,
                    double atom_spacing, double amplitude, std::uint64_t seed) {
  if (slices < 1 || extent.height < 1 || extent.width < 1) {
    throw ConfigError("phantom dimensions must be positive");
  }
  if (!(atom_spacing > 0.0)) throw ConfigError("atom spacing must be positive");
  Volume v = Volume::zeros(slices, extent);
  v.pitch_y = pitch;
  v.pitch_x = pitch;
  if (amplitude == 0.0) return v;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.12, 0.12);
  std::uniform_real_distribution<double> height(0.7, 1.0);
  const int ny = static_cast<int>(std::floor(extent.height / atom_spacing));
  const int nx = static_cast<int>(std::floor(extent.width / atom_spacing));
  const double sigma = 0.16 * atom_spacing;
  const int reach = static_cast<int>(std::ceil(4.0 * sigma));
  for (int s = 0; s < slices; ++s) {
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        const double cy = (iy + 0.5 + jitter(rng)) * atom_spacing;
        const double cx = (ix + 0.5 + jitter(rng)) * atom_spacing;
        const double h = height(rng);
        const int y0 = std::max(0, static_cast<int>(cy) - reach);
        const int y1 = std::min(extent.height, static_cast<int>(cy) + reach + 1);
        const int x0 = std::max(0, static_cast<int>(cx) - reach);
        const int x1 = std::min(extent.width, static_cast<int>(cx) + reach + 1);
        for (int y = y0; y < y1; ++y) {
          for (int x = x0; x < x1; ++x) {
            const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
            v.data.at(s, y, x) += h * std::exp(-d2 / (2.0 * sigma * sigma));
          }
        }
      }
    }
  }
  double peak = 0.0;
  for (double x : v.data.values()) peak = std::max(peak, x);
  if (peak > 0.0) {
    const double scale = amplitude / peak;
    for (double& x : v.data.values()) x = std::min(amplitude, x * scale);
  }
  return v;
}

ProbeParams DatasetHeader::probe_params() const {
  ProbeParams p;
  p.grid_size = static_cast<int>(detector);
  p.aperture_semiangle = aperture;
  p.aperture_rolloff = rolloff;
  p.defocus = defocus;
  p.interaction_constant = sigma;
  p.propagator = propagator;
  return p;
}

DatasetHeader make_header(const ScanPattern& scan, const ProbeParams& probe,
                          int slices, Extent extent, double pitch_y,
                          double pitch_x, double slice_thickness) {
  DatasetHeader h;
  h.detector = static_cast<std::uint32_t>(probe.grid_size);
  h.probes = static_cast<std::uint32_t>(scan.size());
  h.scan_rows = static_cast<std::uint32_t>(scan.grid_rows);
  h.scan_cols = static_cast<std::uint32_t>(scan.grid_cols);
  h.step_y = scan.step_y;
  h.step_x = scan.step_x;
  h.origin_y = scan.origin.y;
  h.origin_x = scan.origin.x;
  h.radius = scan.radius;
  h.slices = static_cast<std::uint32_t>(slices);
  h.height = static_cast<std::uint32_t>(extent.height);
  h.width = static_cast<std::uint32_t>(extent.width);
  h.pitch_y = pitch_y;
  h.pitch_x = pitch_x;
  h.slice_thickness = slice_thickness;
  h.aperture = probe.aperture_semiangle;
  h.rolloff = probe.aperture_rolloff;
  h.defocus = probe.defocus;
  h.sigma = probe.interaction_constant;
  h.propagator = probe.propagator;
  return h;
}

void write_dataset(const std::string& path, const DatasetHeader& h,
                   const std::vector<Measurement>& measurements) {
  if (measurements.size() != h.probes) {
    throw ShapeMismatch("measurement count differs from the header");
  }
  ByteWriter w;
  w.put_magic("PTYG");
  w.put(h.version);
  w.put(h.flags);
  w.put(h.detector);
  w.put(h.probes);
  w.put(h.scan_rows);
  w.put(h.scan_cols);
  w.put(h.step_y);
  w.put(h.step_x);
  w.put(h.origin_y);
  w.put(h.origin_x);
  w.put(h.radius);
  w.put(h.slices);
  w.put(h.height);
  w.put(h.width);
  w.put_f64(h.pitch_y);
  w.put_f64(h.pitch_x);
  w.put_f64(h.slice_thickness);
  w.put(h.seed);
  w.put_f64(h.aperture);
  w.put_f64(h.rolloff);
  w.put_f64(h.defocus);
  w.put_f64(h.sigma);
  w.put_f64(h.propagator);
  w.put_f64(h.dose);
  for (const auto& m : measurements) {
    if (m.magnitude.rows() != static_cast<int>(h.detector) ||
        m.magnitude.cols() != static_cast<int>(h.detector)) {
      throw ShapeMismatch("measurement is not detector x detector");
    }
    for (double v : m.magnitude.values()) w.put_f32(static_cast<float>(v));
  }
  write_bytes(path, w.bytes());
}

Dataset read_dataset(const std::string& path) {
  const auto bytes = read_bytes(path);
  ByteReader r(bytes);
  if (!r.magic_is("PTYG")) throw BadMagic(path + " is not a dataset file");
  Dataset d;
  DatasetHeader& h = d.header;
  h.version = r.get<std::uint16_t>();
  if (h.version != kDatasetVersion) {
    throw VersionMismatch("dataset version " + std::to_string(h.version));
  }
  h.flags = r.get<std::uint16_t>();
  h.detector = r.get<std::uint32_t>();
  h.probes = r.get<std::uint32_t>();
  h.scan_rows = r.get<std::uint32_t>();
  h.scan_cols = r.get<std::uint32_t>();
  h.step_y = r.get<std::int32_t>();
  h.step_x = r.get<std::int32_t>();
  h.origin_y = r.get<std::int32_t>();
  h.origin_x = r.get<std::int32_t>();
  h.radius = r.get<std::int32_t>();
  h.slices = r.get<std::uint32_t>();
  h.height = r.get<std::uint32_t>();
  h.width = r.get<std::uint32_t>();
  h.pitch_y = r.get_f64();
  h.pitch_x = r.get_f64();
  h.slice_thickness = r.get_f64();
  h.seed = r.get<std::uint64_t>();
  h.aperture = r.get_f64();
  h.rolloff = r.get_f64();
  h.defocus = r.get_f64();
  h.sigma = r.get_f64();
  h.propagator = r.get_f64();
  h.dose = r.get_f64();
  if (h.detector == 0 || h.slices == 0 || h.height == 0 || h.width == 0) {
    throw IoError("dataset header has a zero dimension");
  }
  const std::size_t n = static_cast<std::size_t>(h.detector);
  const std::size_t payload = static_cast<std::size_t>(h.probes) * n * n * 4;
  if (r.remaining() < payload) throw TruncatedFile(path + " payload is short");
  if (r.remaining() > payload) throw IoError(path + " has trailing bytes");
  d.measurements.reserve(h.probes);
  for (std::uint32_t i = 0; i < h.probes; ++i) {
    Measurement m{Array2<double>(static_cast<int>(n), static_cast<int>(n)),
                  static_cast<int>(i)};
    for (double& v : m.magnitude.values()) v = r.get_f32();
    d.measurements.push_back(std::move(m));
  }
  return d;
}

ReconProblem problem_from_dataset(const Dataset& dataset) {
  const DatasetHeader& h = dataset.header;
  if (h.step_y != h.step_x || h.origin_y < 0 || h.origin_x < 0) {
    throw ConfigError("only square raster scans are supported");
  }
  ReconProblem p;
  p.extent = {static_cast<int>(h.height), static_cast<int>(h.width)};
  p.slices = static_cast<int>(h.slices);
  p.scan = build_raster_scan(static_cast<int>(h.scan_rows),
                             static_cast<int>(h.scan_cols), h.step_y,
                             {h.origin_y, h.origin_x}, h.radius, p.extent);
  p.probe = make_probe(h.probe_params());
  p.measurements = dataset.measurements;
  p.pitch_y = h.pitch_y;
  p.pitch_x = h.pitch_x;
  p.slice_thickness = h.slice_thickness;
  return p;
}

void write_volume(const std::string& path, const Volume& volume) {
  ByteWriter w;
  w.put_magic("PTYV");
  w.put(kVolumeVersion);
  w.put(std::uint16_t{0});
  w.put(static_cast<std::uint32_t>(volume.slices()));
  w.put(static_cast<std::uint32_t>(volume.extent.height));
  w.put(static_cast<std::uint32_t>(volume.extent.width));
  w.put_f64(volume.pitch_y);
  w.put_f64(volume.pitch_x);
  w.put_f64(volume.slice_thickness);
  if (!(volume.data.region() == Rect::of(volume.extent))) {
    throw ShapeMismatch("volume data does not cover its extent");
  }
  for (double v : volume.data.values()) w.put_f32(static_cast<float>(v));
  write_bytes(path, w.bytes());
}

Volume read_volume(const std::string& path) {
  const auto bytes = read_bytes(path);
  ByteReader r(bytes);
  if (!r.magic_is("PTYV")) throw BadMagic(path + " is not a volume file");
  const auto version = r.get<std::uint16_t>();
  if (version != kVolumeVersion) {
    throw VersionMismatch("volume version " + std::to_string(version));
  }
  r.get<std::uint16_t>();
  const auto s = static_cast<int>(r.get<std::uint32_t>());
  const auto h = static_cast<int>(r.get<std::uint32_t>());
  const auto wd = static_cast<int>(r.get<std::uint32_t>());
  if (s < 1 || h < 1 || wd < 1) throw IoError("volume has a zero dimension");
  Volume v = Volume::zeros(s, {h, wd});
  v.pitch_y = r.get_f64();
  v.pitch_x = r.get_f64();
  v.slice_thickness = r.get_f64();
  const std::size_t payload = v.data.size() * 4;
  if (r.remaining() < payload) throw TruncatedFile(path + " payload is short");
  if (r.remaining() > payload) throw IoError(path + " has trailing bytes");
  for (double& x : v.data.values()) x = r.get_f32();
  return v;
}

SeamScore seam_score(const Volume& volume, const std::vector<TileSpec>& tiles) {
  SeamScore out;
  const Rect& reg = volume.data.region();
  std::set<int> xs;
  std::set<int> ys;
  for (const auto& t : tiles) {
    if (t.interior.x0 > reg.x0) xs.insert(t.interior.x0);
    if (t.interior.y0 > reg.y0) ys.insert(t.interior.y0);
  }
  for (int y : ys) out.borders.push_back({false, y});
  for (int x : xs) out.borders.push_back({true, x});

  double border_sum = 0.0;
  double other_sum = 0.0;
  std::int64_t border_n = 0;
  std::int64_t other_n = 0;
  const RegionArray& d = volume.data;
  for (int s = 0; s < d.slices(); ++s) {
    for (int y = reg.y0; y < reg.y1; ++y) {
      for (int x = reg.x0 + 1; x < reg.x1; ++x) {
        const double diff = d.at(s, y, x) - d.at(s, y, x - 1);
        if (xs.count(x)) {
          border_sum += diff * diff;
          ++border_n;
        } else {
          other_sum += diff * diff;
          ++other_n;
        }
      }
    }
    for (int y = reg.y0 + 1; y < reg.y1; ++y) {
      const bool border = ys.count(y) != 0;
      for (int x = reg.x0; x < reg.x1; ++x) {
        const double diff = d.at(s, y, x) - d.at(s, y - 1, x);
        if (border) {
          border_sum += diff * diff;
          ++border_n;
        } else {
          other_sum += diff * diff;
          ++other_n;
        }
      }
    }
  }
  if (border_n == 0) return out;
  const double num = border_sum / static_cast<double>(border_n);
  const double den = other_n ? other_sum / static_cast<double>(other_n) : 0.0;
  if (den == 0.0) {
    out.value = num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  } else {
    out.value = num / den;
  }
  return out;
}

double rmse(const Volume& a, const Volume& b) {
  require_congruent(a, b);
  const auto va = a.data.values();
  const auto vb = b.data.values();
  if (va.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = va[i] - vb[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(va.size()));
}

double dynamic_range(const Volume& v) {
  const auto vals = v.data.values();
  if (vals.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
  return *hi - *lo;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_convergence_csv(const std::string& path,
                           const std::vector<ConvergenceRow>& log) {
  auto out = open_text(path);
  out << "iteration,cost,sim_time\n";
  for (const auto& row : log) {
    out << row.iteration << ',' << format_double(row.cost) << ','
        << format_double(row.sim_time) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<ConvergenceRow> read_convergence_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "iteration,cost,sim_time") {
    throw IoError(path + " is not a convergence log");
  }
  std::vector<ConvergenceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ConvergenceRow row;
    char c1 = 0;
    char c2 = 0;
    std::istringstream ls(line);
    if (!(ls >> row.iteration >> c1 >> row.cost >> c2 >> row.sim_time) ||
        c1 != ',' || c2 != ',') {
      throw IoError("malformed row in " + path + ": " + line);
    }
    rows.push_back(row);
  }
  return rows;
}

void write_timing_csv(const std::string& path, const TimingBreakdown& timing) {
  auto out = open_text(path);
  out << "worker,compute,wait,comm,messages\n";
  for (const auto& w : timing.workers) {
    out << w.id.mesh_r << ':' << w.id.mesh_c << ',' << format_double(w.compute)
        << ',' << format_double(w.wait) << ',' << format_double(w.comm) << ','
        << w.messages_sent << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

void write_memory_csv(const std::string& path, const MemoryReport& report) {
  auto out = open_text(path);
  out << "worker,voxels,measurements,buffer_voxels,probes,total\n";
  for (const auto& w : report.workers) {
    out << w.id.mesh_r << ':' << w.id.mesh_c << ',' << w.voxels << ','
        << w.measurements << ',' << w.buffer_voxels << ',' << w.probes << ','
        << w.total() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<std::uint8_t> render_pgm(const Volume& volume, int slice) {
  if (slice < 0 || slice >= volume.slices()) {
    throw OutOfBounds("slice " + std::to_string(slice) + " outside [0, " +
                      std::to_string(volume.slices()) + ")");
  }
  const Rect& reg = volume.data.region();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int y = reg.y0; y < reg.y1; ++y) {
    for (int x = reg.x0; x < reg.x1; ++x) {
      lo = std::min(lo, volume.data.at(slice, y, x));
      hi = std::max(hi, volume.data.at(slice, y, x));
    }
  }
  const std::string head = "P5\n" + std::to_string(reg.width()) + " " +
                           std::to_string(reg.height()) + "\n255\n";
  std::vector<std::uint8_t> out(head.begin(), head.end());
  out.reserve(head.size() + static_cast<std::size_t>(reg.area()));
  for (int y = reg.y0; y < reg.y1; ++y) {
    for (int x = reg.x0; x < reg.x1; ++x) {
      double g = 0.0;
      if (hi > lo) g = 255.0 * (volume.data.at(slice, y, x) - lo) / (hi - lo);
      out.push_back(static_cast<std::uint8_t>(std::lround(g)));
    }
  }
  return out;
}

void write_pgm(const std::string& path, const Volume& volume, int slice) {
  write_bytes(path, render_pgm(volume, slice));
}

void write_text(const std::string& path, const std::string& text) {
  write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace ptychotile
