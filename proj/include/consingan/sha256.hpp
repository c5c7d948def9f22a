#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "consingan/autograd.hpp"

namespace consingan {

std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file(const std::string& path);

// digest of the concatenated raw float bytes of a parameter list
std::string hash_params(const std::vector<ag::Var>& params);

}  // namespace consingan
