#include "dialrel/runlog.hpp"

#include <array>
#include <fstream>
#include <memory>

#include <json.hpp>
#include <openssl/evp.h>

#include "dialrel/errors.hpp"

namespace dialrel {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot hash " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 initialisation failed");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

void RunLog::write(const std::filesystem::path& path) const {
  nlohmann::json inputs_json = nlohmann::json::array();
  for (const auto& p : inputs) inputs_json.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  nlohmann::json outputs_json = nlohmann::json::array();
  for (const auto& p : outputs) {
    nlohmann::json o{{"path", p.string()}};
    if (std::filesystem::is_regular_file(p)) o["sha256"] = sha256_file(p);
    outputs_json.push_back(std::move(o));
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << nlohmann::json{{"command", command},
                        {"config", config},
                        {"seeds", seeds},
                        {"inputs", inputs_json},
                        {"outputs", outputs_json}}
             .dump(2)
      << '\n';
}

}  // namespace dialrel
