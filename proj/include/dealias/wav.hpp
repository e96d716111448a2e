#pragma once

#include <filesystem>

#include "dealias/core.hpp"

namespace dealias {

// RIFF/WAVE, 32-bit IEEE float, interleaved channels.
void WriteWav(const std::filesystem::path& path, const MultichannelSignal& signal);
void WriteWav(const std::filesystem::path& path, const MonoSignal& signal);

// Reads IEEE float32 files (plain or WAVE_FORMAT_EXTENSIBLE) and 16-bit PCM.
MultichannelSignal ReadWav(const std::filesystem::path& path);

}  // namespace dealias
