#include "cbma/volume_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cbma/io_util.hpp"

namespace cbma {

static_assert(std::endian::native == std::endian::little, "volume I/O assumes a little-endian host");

namespace {

std::string lower_ext(const std::filesystem::path& p) {
  auto e = p.extension().string();
  for (auto& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e;
}

template <typename T>
void write_vgrid_impl(const std::filesystem::path& path, const VolumeGrid<T>& grid, const char* dtype) {
  const auto& g = grid.geometry();
  std::ostringstream header;
  header << "VGRID1 " << g.dims[0] << ' ' << g.dims[1] << ' ' << g.dims[2];
  for (double v : g.voxel_size) header << ' ' << format_double(v);
  for (double v : g.origin) header << ' ' << format_double(v);
  header << ' ' << dtype << '\n';
  write_atomic(path, [&](std::ostream& out) {
    out << header.str();
    out.write(reinterpret_cast<const char*>(grid.data().data()), static_cast<std::streamsize>(grid.size() * sizeof(T)));
  });
}

template <typename T>
VolumeGrid<T> read_payload(std::istream& in, const GridGeometry& g, const std::filesystem::path& path) {
  std::vector<T> data(g.voxel_count());
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(T)));
  if (static_cast<std::size_t>(in.gcount()) != data.size() * sizeof(T))
    throw IoError("'" + path.string() + "': truncated volume payload");
  return VolumeGrid<T>(g, std::move(data));
}

// NIfTI-1 header field offsets.
constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kVoxOffset = 352;
constexpr short kDtUint8 = 2;
constexpr short kDtInt16 = 4;
constexpr short kDtInt32 = 8;
constexpr short kDtFloat32 = 16;
constexpr short kDtFloat64 = 64;

template <typename T>
void put(std::vector<char>& buf, std::size_t offset, T value) {
  std::memcpy(buf.data() + offset, &value, sizeof(T));
}

template <typename T>
T get(const std::vector<char>& buf, std::size_t offset, bool swap) {
  T value;
  std::memcpy(&value, buf.data() + offset, sizeof(T));
  if (swap) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    std::reverse(bytes, bytes + sizeof(T));
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

template <typename T>
void write_nifti_impl(const std::filesystem::path& path, const VolumeGrid<T>& grid, short datatype) {
  const auto& g = grid.geometry();
  std::vector<char> hdr(kVoxOffset, 0);
  put<int>(hdr, 0, static_cast<int>(kHeaderSize));
  hdr[38] = 'r';
  const short dim[8] = {3, static_cast<short>(g.dims[0]), static_cast<short>(g.dims[1]), static_cast<short>(g.dims[2]), 1, 1, 1, 1};
  for (int d = 0; d < 3; ++d)
    if (g.dims[d] > 32767) throw IoError("grid too large for NIfTI-1");
  for (int d = 0; d < 8; ++d) put<short>(hdr, 40 + 2 * d, dim[d]);
  put<short>(hdr, 70, datatype);
  put<short>(hdr, 72, static_cast<short>(sizeof(T) * 8));
  const float pixdim[8] = {1.0f, static_cast<float>(g.voxel_size[0]), static_cast<float>(g.voxel_size[1]),
                           static_cast<float>(g.voxel_size[2]), 1.0f, 1.0f, 1.0f, 1.0f};
  for (int d = 0; d < 8; ++d) put<float>(hdr, 76 + 4 * d, pixdim[d]);
  put<float>(hdr, 108, static_cast<float>(kVoxOffset));
  put<float>(hdr, 112, 1.0f);
  hdr[123] = 2;  // NIFTI_UNITS_MM
  const char descrip[] = "cbma";
  std::memcpy(hdr.data() + 148, descrip, sizeof descrip);
  put<short>(hdr, 252, 2);  // qform: aligned anat, identity rotation
  put<short>(hdr, 254, 2);  // sform
  for (int a = 0; a < 3; ++a) put<float>(hdr, 268 + 4 * a, static_cast<float>(g.origin[a]));
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) put<float>(hdr, 280 + 16 * r + 4 * c, r == c ? static_cast<float>(g.voxel_size[r]) : 0.0f);
    put<float>(hdr, 280 + 16 * r + 12, static_cast<float>(g.origin[r]));
  }
  std::memcpy(hdr.data() + 344, "n+1\0", 4);
  write_atomic(path, [&](std::ostream& out) {
    out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    out.write(reinterpret_cast<const char*>(grid.data().data()), static_cast<std::streamsize>(grid.size() * sizeof(T)));
  });
}

template <typename T>
std::vector<double> read_converted(std::istream& in, std::size_t n, bool swap, const std::filesystem::path& path) {
  std::vector<char> raw(n * sizeof(T));
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw IoError("'" + path.string() + "': truncated NIfTI payload");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(get<T>(raw, i * sizeof(T), swap));
  return out;
}

}  // namespace

void write_vgrid(const std::filesystem::path& path, const MaskGrid& grid) { write_vgrid_impl(path, grid, "u8"); }
void write_vgrid(const std::filesystem::path& path, const RealGrid& grid) { write_vgrid_impl(path, grid, "f64"); }

AnyVolume read_vgrid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open volume '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("'" + path.string() + "': empty volume file", 1);
  std::istringstream header(line);
  std::string magic;
  std::string dtype;
  GridGeometry g;
  header >> magic >> g.dims[0] >> g.dims[1] >> g.dims[2] >> g.voxel_size[0] >> g.voxel_size[1] >> g.voxel_size[2] >>
      g.origin[0] >> g.origin[1] >> g.origin[2] >> dtype;
  if (magic != "VGRID1") throw ParseError("'" + path.string() + "': not a VGRID1 file", 1);
  if (!header) throw ParseError("'" + path.string() + "': malformed VGRID1 header", 1);
  g.validate();
  if (dtype == "u8") return read_payload<std::uint8_t>(in, g, path);
  if (dtype == "f64") return read_payload<double>(in, g, path);
  throw ParseError("'" + path.string() + "': unsupported VGRID1 dtype '" + dtype + "'", 1);
}

void write_nifti(const std::filesystem::path& path, const MaskGrid& grid) { write_nifti_impl(path, grid, kDtUint8); }
void write_nifti(const std::filesystem::path& path, const RealGrid& grid) { write_nifti_impl(path, grid, kDtFloat64); }

AnyVolume read_nifti(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open volume '" + path.string() + "'");
  std::vector<char> hdr(kHeaderSize);
  in.read(hdr.data(), static_cast<std::streamsize>(kHeaderSize));
  if (in.gcount() != static_cast<std::streamsize>(kHeaderSize)) throw IoError("'" + path.string() + "': truncated NIfTI header");
  bool swap = false;
  if (get<int>(hdr, 0, false) != static_cast<int>(kHeaderSize)) {
    swap = true;
    if (get<int>(hdr, 0, true) != static_cast<int>(kHeaderSize)) throw ParseError("'" + path.string() + "': not a NIfTI-1 file");
  }
  if (std::memcmp(hdr.data() + 344, "n+1", 3) != 0) throw ParseError("'" + path.string() + "': only single-file NIfTI-1 is supported");
  const short ndim = get<short>(hdr, 40, swap);
  GridGeometry g;
  for (int d = 0; d < 3; ++d) g.dims[d] = d < ndim ? get<short>(hdr, 42 + 2 * d, swap) : 1;
  for (int d = 3; d < ndim && d < 7; ++d)
    if (get<short>(hdr, 42 + 2 * d, swap) > 1) throw ParseError("'" + path.string() + "': only 3D volumes are supported");
  const short datatype = get<short>(hdr, 70, swap);
  const auto vox_offset = static_cast<std::streamoff>(get<float>(hdr, 108, swap));
  float slope = get<float>(hdr, 112, swap);
  const float inter = get<float>(hdr, 116, swap);
  const short sform_code = get<short>(hdr, 254, swap);
  if (sform_code > 0) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        const float v = get<float>(hdr, 280 + 16 * r + 4 * c, swap);
        if (r != c && v != 0.0f) throw ParseError("'" + path.string() + "': oblique or permuted affines are not supported");
        if (r == c) g.voxel_size[r] = v;
      }
      g.origin[r] = get<float>(hdr, 280 + 16 * r + 12, swap);
    }
  } else {
    for (int d = 0; d < 3; ++d) {
      g.voxel_size[d] = get<float>(hdr, 80 + 4 * d, swap);
      g.origin[d] = get<float>(hdr, 268 + 4 * d, swap);
    }
  }
  g.validate();
  in.seekg(vox_offset);
  const auto n = g.voxel_count();
  if (datatype == kDtUint8 && !swap && (slope == 0.0f || slope == 1.0f) && inter == 0.0f)
    return read_payload<std::uint8_t>(in, g, path);
  std::vector<double> values;
  switch (datatype) {
    case kDtUint8: values = read_converted<std::uint8_t>(in, n, false, path); break;
    case kDtInt16: values = read_converted<std::int16_t>(in, n, swap, path); break;
    case kDtInt32: values = read_converted<std::int32_t>(in, n, swap, path); break;
    case kDtFloat32: values = read_converted<float>(in, n, swap, path); break;
    case kDtFloat64: values = read_converted<double>(in, n, swap, path); break;
    default: throw ParseError("'" + path.string() + "': unsupported NIfTI datatype " + std::to_string(datatype));
  }
  if (slope != 0.0f && !(slope == 1.0f && inter == 0.0f))
    for (auto& v : values) v = v * slope + inter;
  return RealGrid(g, std::move(values));
}

AnyVolume read_volume(const std::filesystem::path& path) {
  if (lower_ext(path) == ".nii") return read_nifti(path);
  return read_vgrid(path);
}

void write_volume(const std::filesystem::path& path, const AnyVolume& volume) {
  const bool nifti = lower_ext(path) == ".nii";
  std::visit([&](const auto& grid) { nifti ? write_nifti(path, grid) : write_vgrid(path, grid); }, volume);
}

BrainMask load_mask(const std::filesystem::path& path) {
  const auto volume = read_volume(path);
  return std::visit(
      [](const auto& grid) {
        MaskGrid mask(grid.geometry(), 0);
        for (std::size_t i = 0; i < grid.size(); ++i) mask[i] = grid[i] != 0 ? 1 : 0;
        return BrainMask(std::move(mask));
      },
      volume);
}

}  // namespace cbma
