#pragma once

#include <string>
#include <vector>

#include "wan/tensor.hpp"

namespace wan::dataset {

// one manifest row; weak_label -1 means the column was empty
struct ManifestEntry {
  std::string path;
  std::string split;
  int weak_label = -1;
  std::string mask_path;
};

// entries keep file order; paths are relative to root (the manifest's directory)
struct Manifest {
  std::string root;
  std::vector<ManifestEntry> entries;
};

// header must be exactly `path,split,weak_label,mask_path`; duplicate image
// paths are rejected, so splits are disjoint by construction
Manifest read_manifest(const std::string& csv_path);
void write_manifest(const std::string& csv_path, const std::vector<ManifestEntry>& entries);

std::vector<ManifestEntry> split_entries(const Manifest& m, const std::string& split);

Tensor load_image(const Manifest& m, const ManifestEntry& e);  // 3 x S x S in [0,1]
Tensor load_mask(const Manifest& m, const ManifestEntry& e);   // 1 x S x S in {0,1}

// process-wide audit: total load_mask calls; training code reconciles this
// against its own tally to prove it never touched a mask it should not see
int64_t mask_reads();

// rank+1 tensor over samples of identical shape
Tensor stack(const std::vector<Tensor>& samples);

}  // namespace wan::dataset
