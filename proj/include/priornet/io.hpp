#pragma once

#include <filesystem>
#include <string>

#include "priornet/volume.hpp"

namespace priornet {

enum class DataType { uint8, int16, int32, float32, float64 };

std::string to_string(DataType t);
DataType parse_data_type(const std::string& s);

// pvol:  "PVOL1 <dtype> <ndim> <dims...> <spacing...>\n" + little-endian C-order data.
// nifti: single-file uncompressed NIfTI-1 ("n+1"), 348-byte header, data at 352.
enum class FileFormat { pvol, nifti };

// ".nii" selects NIfTI; anything else is PVOL1.
FileFormat format_for_path(const std::filesystem::path& path);

// Images are written as float32.
void write_volume(const std::filesystem::path& path, const Volume& v);

// Labels are written as uint8, or int16 when the largest label exceeds 255.
void write_labelmap(const std::filesystem::path& path, const LabelMap& labels);

// The format is detected from the file contents, not the extension.
Volume read_volume(const std::filesystem::path& path);

// num_classes == 0 means "the largest label in the file" (at least 1).
LabelMap read_labelmap(const std::filesystem::path& path, int num_classes = 0);

}  // namespace priornet
