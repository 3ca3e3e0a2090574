#pragma once

#include <iosfwd>
#include <string>

#include "rt/model.hpp"

namespace rt {

// Binary checkpoint format, magic "RCKPT1":
//   6 bytes magic, u32 length + that many bytes of key=value architecture
//   lines, u32 parameter count, then per parameter (creation order):
//   u16 name length, name bytes, embedded tensor record.
// Loading rebuilds the architecture from the header, checks every parameter
// name and shape against it, and converts either scalar width to the
// build's. Distinct errors for wrong magic, unsupported version and
// truncation.
void write_checkpoint(std::ostream& out, const Model& m);
Model read_checkpoint(std::istream& in);

void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace rt
