// Copyright 2026 The minigrid Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "minigrid/gsi.hpp"

#include <sodium.h>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <stdexcept>

#include <fmt/format.h>

#include "minigrid/codec.hpp"
#include "minigrid/error.hpp"
#include "minigrid/strings.hpp"

namespace minigrid::gsi {

namespace {

constexpr std::string_view kCertLabel = "MINIGRID CERTIFICATE";
constexpr std::string_view kSealedKeyLabel = "MINIGRID ENCRYPTED PRIVATE KEY";
constexpr std::string_view kSecretKeyLabel = "MINIGRID PRIVATE KEY";
constexpr std::size_t kSaltBytes = 16;

void ensure_sodium() {
  static const bool ready = sodium_init() >= 0;
  if (!ready) throw std::runtime_error("libsodium failed to initialize");
}

const unsigned char* u8(std::string_view s) { return reinterpret_cast<const unsigned char*>(s.data()); }

std::string random_bytes(SeedSource& seed, std::size_t n) {
  std::string out(n, '\0');
  seed.fill({reinterpret_cast<unsigned char*>(out.data()), n});
  return out;
}

std::string key_id_for(std::string_view public_key) {
  ensure_sodium();
  unsigned char out[16];
  crypto_generichash(out, sizeof out, u8(public_key), public_key.size(), nullptr, 0);
  return codec::hex_encode(std::string_view(reinterpret_cast<const char*>(out), sizeof out));
}

// --- armor --------------------------------------------------------------

std::string armor(std::string_view label, std::string_view bytes) {
  std::string out = fmt::format("-----BEGIN {}-----\n", label);
  const auto b64 = codec::base64_encode(bytes);
  for (std::size_t i = 0; i < b64.size(); i += 64) out += b64.substr(i, 64) + "\n";
  out += fmt::format("-----END {}-----\n", label);
  return out;
}

std::vector<std::string> unarmor_all(std::string_view text, std::string_view label, Errc error) {
  const auto begin = fmt::format("-----BEGIN {}-----", label);
  const auto end = fmt::format("-----END {}-----", label);
  std::vector<std::string> blocks;
  std::optional<std::string> body;
  for (const auto& raw : strings::split_lines(text)) {
    const auto line = std::string(strings::trim(raw));
    if (line == begin) {
      if (body) throw Error(error, "nested " + begin);
      body = std::string();
    } else if (line == end) {
      if (!body) throw Error(error, "unexpected " + end);
      auto bytes = codec::base64_decode(*body);
      if (!bytes) throw Error(error, "bad base64 payload");
      blocks.push_back(std::move(*bytes));
      body.reset();
    } else if (body) {
      *body += line;
    }
  }
  if (body) throw Error(error, "missing " + end);
  return blocks;
}

std::string unarmor_one(std::string_view text, std::string_view label, Errc error) {
  auto blocks = unarmor_all(text, label, error);
  if (blocks.size() != 1) throw Error(error, fmt::format("expected one {} block", label));
  return std::move(blocks.front());
}

// --- key: value records ---------------------------------------------------

using Fields = std::vector<std::pair<std::string, std::string>>;

Fields parse_fields(std::string_view text, std::string_view magic, Errc error) {
  auto lines = strings::split_lines(text);
  if (lines.empty() || lines.front() != magic) throw Error(error, "unrecognized encoding");
  Fields out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto colon = lines[i].find(": ");
    if (colon == std::string::npos) throw Error(error, fmt::format("malformed field '{}'", lines[i]));
    out.emplace_back(lines[i].substr(0, colon), lines[i].substr(colon + 2));
  }
  return out;
}

const std::string& field(const Fields& fields, std::string_view name, Errc error) {
  for (const auto& [k, v] : fields) {
    if (k == name) return v;
  }
  throw Error(error, fmt::format("missing field '{}'", name));
}

std::string hex_field(const Fields& fields, std::string_view name, Errc error, std::size_t size = 0) {
  auto bytes = codec::hex_decode(field(fields, name, error));
  if (!bytes || (size != 0 && bytes->size() != size)) throw Error(error, fmt::format("bad field '{}'", name));
  return *bytes;
}

std::int64_t int_field(const Fields& fields, std::string_view name, Errc error) {
  const auto& text = field(fields, name, error);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) throw Error(error, fmt::format("bad field '{}'", name));
  return v;
}

std::string derive_box_key(std::string_view passphrase, std::string_view salt) {
  ensure_sodium();
  std::string key(crypto_secretbox_KEYBYTES, '\0');
  crypto_generichash(reinterpret_cast<unsigned char*>(key.data()), key.size(), u8(passphrase), passphrase.size(),
                     u8(salt), salt.size());
  return key;
}

bool signature_ok(const Certificate& cert, std::string_view public_key) {
  ensure_sodium();
  if (cert.signature.size() != crypto_sign_BYTES || public_key.size() != crypto_sign_PUBLICKEYBYTES) return false;
  const auto body = cert.canonical_body();
  return crypto_sign_verify_detached(u8(cert.signature), u8(body), body.size(), u8(public_key)) == 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Seeds

void SystemSeed::fill(std::span<unsigned char> out) {
  ensure_sodium();
  randombytes_buf(out.data(), out.size());
}

void DeterministicSeed::fill(std::span<unsigned char> out) {
  for (auto& b : out) b = static_cast<unsigned char>(rng_() & 0xff);
}

// ---------------------------------------------------------------------------
// Certificates

std::string Certificate::canonical_body() const {
  return fmt::format("minigrid-cert v1\nsubject: {}\nissuer: {}\nnot_before: {}\nnot_after: {}\nkey_id: {}\n"
                     "public_key: {}\n",
                     subject_dn, issuer_dn, to_epoch_seconds(not_before), to_epoch_seconds(not_after), key_id,
                     codec::hex_encode(public_key));
}

std::string encode_certificate(const Certificate& cert) {
  return cert.canonical_body() + "signature: " + codec::hex_encode(cert.signature) + "\n";
}

Certificate decode_certificate(std::string_view bytes) {
  constexpr auto E = Errc::MalformedCertificate;
  if (bytes.empty() || bytes.back() != '\n') throw Error(E, "truncated certificate");
  const auto fields = parse_fields(bytes.substr(0, bytes.size() - 1), "minigrid-cert v1", E);
  if (fields.size() != 7) throw Error(E, "unexpected field count");
  Certificate cert;
  cert.subject_dn = field(fields, "subject", E);
  cert.issuer_dn = field(fields, "issuer", E);
  cert.not_before = from_epoch_seconds(int_field(fields, "not_before", E));
  cert.not_after = from_epoch_seconds(int_field(fields, "not_after", E));
  cert.key_id = field(fields, "key_id", E);
  cert.public_key = hex_field(fields, "public_key", E, crypto_sign_PUBLICKEYBYTES);
  cert.signature = hex_field(fields, "signature", E, crypto_sign_BYTES);
  if (encode_certificate(cert) != bytes) throw Error(E, "non-canonical certificate encoding");
  return cert;
}

std::string certificate_to_pem(const Certificate& cert) { return armor(kCertLabel, encode_certificate(cert)); }

std::vector<Certificate> certificates_from_pem(std::string_view text) {
  std::vector<Certificate> out;
  for (const auto& block : unarmor_all(text, kCertLabel, Errc::MalformedCertificate)) {
    out.push_back(decode_certificate(block));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Keys

SecretKey generate_key(SeedSource& seed) {
  ensure_sodium();
  const auto material = random_bytes(seed, crypto_sign_SEEDBYTES);
  std::string pk(crypto_sign_PUBLICKEYBYTES, '\0');
  std::string sk(crypto_sign_SECRETKEYBYTES, '\0');
  crypto_sign_seed_keypair(reinterpret_cast<unsigned char*>(pk.data()), reinterpret_cast<unsigned char*>(sk.data()),
                           u8(material));
  return {key_id_for(pk), std::move(sk), std::move(pk)};
}

PrivateKey seal_key(const SecretKey& key, std::string_view passphrase, SeedSource& seed) {
  ensure_sodium();
  PrivateKey out;
  out.key_id = key.key_id;
  out.salt = random_bytes(seed, kSaltBytes);
  out.nonce = random_bytes(seed, crypto_secretbox_NONCEBYTES);
  const auto box_key = derive_box_key(passphrase, out.salt);
  out.ciphertext.resize(key.secret.size() + crypto_secretbox_MACBYTES);
  crypto_secretbox_easy(reinterpret_cast<unsigned char*>(out.ciphertext.data()), u8(key.secret), key.secret.size(),
                        u8(out.nonce), u8(box_key));
  return out;
}

SecretKey open_key(const PrivateKey& key, std::string_view passphrase) {
  ensure_sodium();
  if (key.ciphertext.size() != crypto_sign_SECRETKEYBYTES + crypto_secretbox_MACBYTES ||
      key.nonce.size() != crypto_secretbox_NONCEBYTES) {
    throw Error(Errc::MalformedCertificate, "malformed private key");
  }
  const auto box_key = derive_box_key(passphrase, key.salt);
  std::string secret(crypto_sign_SECRETKEYBYTES, '\0');
  if (crypto_secretbox_open_easy(reinterpret_cast<unsigned char*>(secret.data()), u8(key.ciphertext),
                                 key.ciphertext.size(), u8(key.nonce), u8(box_key)) != 0) {
    throw Error(Errc::BadPassphrase, "wrong pass phrase for this identity");
  }
  std::string pk(crypto_sign_PUBLICKEYBYTES, '\0');
  crypto_sign_ed25519_sk_to_pk(reinterpret_cast<unsigned char*>(pk.data()), u8(secret));
  return {key.key_id, std::move(secret), std::move(pk)};
}

std::string private_key_to_pem(const PrivateKey& key) {
  return armor(kSealedKeyLabel, fmt::format("minigrid-key v1\nkey_id: {}\nsalt: {}\nnonce: {}\nciphertext: {}\n",
                                            key.key_id, codec::hex_encode(key.salt), codec::hex_encode(key.nonce),
                                            codec::hex_encode(key.ciphertext)));
}

PrivateKey private_key_from_pem(std::string_view text) {
  constexpr auto E = Errc::MalformedCertificate;
  const auto body = unarmor_one(text, kSealedKeyLabel, E);
  const auto fields = parse_fields(body, "minigrid-key v1", E);
  return {field(fields, "key_id", E), hex_field(fields, "salt", E), hex_field(fields, "nonce", E),
          hex_field(fields, "ciphertext", E)};
}

std::string secret_key_to_pem(const SecretKey& key) {
  return armor(kSecretKeyLabel,
               fmt::format("minigrid-key v1\nkey_id: {}\nsecret: {}\n", key.key_id, codec::hex_encode(key.secret)));
}

SecretKey secret_key_from_pem(std::string_view text) {
  constexpr auto E = Errc::MalformedCertificate;
  const auto body = unarmor_one(text, kSecretKeyLabel, E);
  const auto fields = parse_fields(body, "minigrid-key v1", E);
  auto secret = hex_field(fields, "secret", E, crypto_sign_SECRETKEYBYTES);
  std::string pk(crypto_sign_PUBLICKEYBYTES, '\0');
  crypto_sign_ed25519_sk_to_pk(reinterpret_cast<unsigned char*>(pk.data()), u8(secret));
  return {field(fields, "key_id", E), std::move(secret), std::move(pk)};
}

Certificate sign_certificate(std::string subject_dn, std::string issuer_dn, Timestamp not_before,
                             Timestamp not_after, std::string_view subject_public_key, const SecretKey& issuer_key) {
  ensure_sodium();
  if (!(not_before < not_after)) throw Error(Errc::InvalidLifetime, "certificate lifetime must be positive");
  for (const auto* dn : {&subject_dn, &issuer_dn}) {
    if (dn->find('\n') != std::string::npos) throw Error(Errc::MalformedCertificate, "DN contains a newline");
  }
  Certificate cert;
  cert.subject_dn = std::move(subject_dn);
  cert.issuer_dn = std::move(issuer_dn);
  cert.not_before = std::chrono::floor<std::chrono::seconds>(not_before);
  cert.not_after = std::chrono::floor<std::chrono::seconds>(not_after);
  cert.key_id = key_id_for(subject_public_key);
  cert.public_key = std::string(subject_public_key);
  const auto body = cert.canonical_body();
  cert.signature.resize(crypto_sign_BYTES);
  crypto_sign_detached(reinterpret_cast<unsigned char*>(cert.signature.data()), nullptr, u8(body), body.size(),
                       u8(issuer_key.secret));
  return cert;
}

// ---------------------------------------------------------------------------
// Certificate authority

std::string ca_subject(std::string_view name) {
  return fmt::format("/O=Grid/OU=GlobusTest/OU={}/CN=Globus Simple CA", name);
}

CertificateAuthority CertificateAuthority::init(const NodeFs& fs, const std::string& dir, std::string_view name,
                                                Timestamp now, SeedSource& seed, Duration lifetime) {
  const auto cert_path = dir + "/cacert.pem";
  if (fs.exists(cert_path)) throw Error(Errc::AlreadyInitialized, "a CA already exists in " + dir);
  if (lifetime <= Duration{0}) throw Error(Errc::InvalidLifetime, "CA lifetime must be positive");
  auto key = generate_key(seed);
  const auto dn = ca_subject(name);
  auto root = sign_certificate(dn, dn, now, now + lifetime, key.public_key, key);
  fs.write(cert_path, certificate_to_pem(root));
  fs.write(dir + "/cakey.pem", secret_key_to_pem(key));
  return {std::move(root), std::move(key)};
}

CertificateAuthority CertificateAuthority::load(const NodeFs& fs, const std::string& dir) {
  const auto cert = fs.read(dir + "/cacert.pem");
  const auto key = fs.read(dir + "/cakey.pem");
  if (!cert || !key) throw Error(Errc::UnknownIssuer, "no CA initialized in " + dir);
  auto certs = certificates_from_pem(*cert);
  if (certs.size() != 1) throw Error(Errc::MalformedCertificate, "CA certificate file must hold one certificate");
  return {std::move(certs.front()), secret_key_from_pem(*key)};
}

IssuedCredential CertificateAuthority::issue(std::string subject_dn, Duration lifetime, std::string_view passphrase,
                                             Timestamp now, SeedSource& seed) const {
  if (lifetime <= Duration{0}) throw Error(Errc::InvalidLifetime, "certificate lifetime must be positive");
  auto key = generate_key(seed);
  const auto not_after = std::min(now + lifetime, root_.not_after);
  auto cert = sign_certificate(std::move(subject_dn), root_.subject_dn, now, not_after, key.public_key, key_);
  return {std::move(cert), seal_key(key, passphrase, seed)};
}

// ---------------------------------------------------------------------------
// Proxies

ProxyCredential proxy_init(const Certificate& user_cert, const PrivateKey& user_key, std::string_view passphrase,
                           Timestamp now, SeedSource& seed, Duration lifetime) {
  if (lifetime <= Duration{0}) throw Error(Errc::InvalidLifetime, "proxy lifetime must be positive");
  const auto user_secret = open_key(user_key, passphrase);
  if (now < user_cert.not_before || now >= user_cert.not_after) {
    throw Error(Errc::UserCertExpired,
                fmt::format("user certificate is valid only from {} until {}", format_ctime(user_cert.not_before),
                            format_ctime(user_cert.not_after)));
  }
  ProxyCredential proxy;
  proxy.proxy_key = generate_key(seed);
  const auto not_before = std::chrono::floor<std::chrono::seconds>(now);
  const auto not_after = std::min(not_before + lifetime, user_cert.not_after);
  proxy.proxy_cert = sign_certificate(user_cert.subject_dn + std::string(kProxySuffix), user_cert.subject_dn,
                                      not_before, not_after, proxy.proxy_key.public_key, user_secret);
  proxy.chain = {proxy.proxy_cert, user_cert};
  return proxy;
}

ProxyCredential delegate(const ProxyCredential& proxy, Timestamp now, SeedSource& seed, Duration lifetime) {
  ProxyCredential out;
  out.proxy_key = generate_key(seed);
  const auto not_before = std::chrono::floor<std::chrono::seconds>(now);
  const auto not_after = std::max(not_before + seconds(1), std::min(not_before + lifetime, proxy.proxy_cert.not_after));
  out.proxy_cert = sign_certificate(identity_dn(proxy.proxy_cert.subject_dn) + std::string(kProxySuffix),
                                    proxy.proxy_cert.subject_dn, not_before, not_after, out.proxy_key.public_key,
                                    proxy.proxy_key);
  out.chain.push_back(out.proxy_cert);
  out.chain.insert(out.chain.end(), proxy.chain.begin(), proxy.chain.end());
  return out;
}

ProxyInfo proxy_info(const ProxyCredential& proxy, Timestamp now) {
  ProxyInfo info;
  info.subject = proxy.proxy_cert.subject_dn;
  info.issuer = proxy.proxy_cert.issuer_dn;
  info.time_left = std::max(Duration{0}, proxy.proxy_cert.not_after - now);
  info.expired = now >= proxy.proxy_cert.not_after;
  return info;
}

std::string encode_proxy(const ProxyCredential& proxy) {
  std::string out = certificate_to_pem(proxy.proxy_cert) + secret_key_to_pem(proxy.proxy_key);
  for (std::size_t i = 1; i < proxy.chain.size(); ++i) out += certificate_to_pem(proxy.chain[i]);
  return out;
}

ProxyCredential decode_proxy(std::string_view text) {
  ProxyCredential proxy;
  proxy.chain = certificates_from_pem(text);
  if (proxy.chain.empty()) throw Error(Errc::MalformedCertificate, "proxy file holds no certificate");
  proxy.proxy_cert = proxy.chain.front();
  proxy.proxy_key = secret_key_from_pem(text);
  return proxy;
}

// ---------------------------------------------------------------------------
// Verification

void verify_chain(std::span<const Certificate> chain, std::span<const Certificate> anchors, Timestamp now,
                  Duration max_skew) {
  if (chain.empty()) throw Error(Errc::AuthFailed, "no credential presented");

  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    if (!signature_ok(chain[i], chain[i + 1].public_key)) {
      throw Error(Errc::BadSignature, fmt::format("signature on {} does not verify", chain[i].subject_dn));
    }
  }
  const auto& last = chain.back();
  const Certificate* anchor = nullptr;
  for (const auto& a : anchors) {
    if (a.subject_dn == last.issuer_dn) anchor = &a;
  }
  if (anchor == nullptr) {
    throw Error(Errc::UnknownIssuer, fmt::format("issuer {} is not a trusted CA", last.issuer_dn));
  }
  if (!signature_ok(last, anchor->public_key)) {
    throw Error(Errc::BadSignature, fmt::format("signature on {} does not verify", last.subject_dn));
  }
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    if (chain[i].issuer_dn != chain[i + 1].subject_dn) {
      throw Error(Errc::UnknownIssuer,
                  fmt::format("{} is not issued by {}", chain[i].subject_dn, chain[i + 1].subject_dn));
    }
  }
  for (const auto& cert : chain) {
    if (now < cert.not_before - max_skew) {
      throw Error(Errc::FutureCertificate,
                  fmt::format("You have sent a certificate with future date/time: {} is not valid before {} "
                              "(verifier clock {}, tolerance {}s)",
                              cert.subject_dn, format_ctime(cert.not_before), format_ctime(now),
                              std::chrono::duration_cast<std::chrono::seconds>(max_skew).count()));
    }
    if (now > cert.not_after + max_skew) {
      throw Error(Errc::Expired, fmt::format("certificate {} expired at {}", cert.subject_dn,
                                             format_ctime(cert.not_after)));
    }
  }
}

std::string identity_dn(std::string_view subject_dn) {
  if (subject_dn.size() > kProxySuffix.size() && subject_dn.substr(subject_dn.size() - kProxySuffix.size()) == kProxySuffix) {
    subject_dn.remove_suffix(kProxySuffix.size());
  }
  return std::string(subject_dn);
}

// ---------------------------------------------------------------------------
// Gridmap

Gridmap Gridmap::parse(std::string_view text) {
  Gridmap map;
  const auto lines = strings::split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto line = strings::trim(lines[n]);
    if (line.empty() || line.front() == '#') continue;
    auto fail = [&](std::string_view why) {
      return Error(Errc::ParseError, fmt::format("gridmap line {}: {}", n + 1, why));
    };
    if (line.front() != '"') throw fail("DN must be double-quoted");
    const auto close = line.find('"', 1);
    if (close == std::string_view::npos) throw fail("unterminated DN");
    const auto user = strings::trim(line.substr(close + 1));
    if (user.empty() || user.find_first_of(" \t") != std::string_view::npos) throw fail("expected one user name");
    map.add(std::string(line.substr(1, close - 1)), std::string(user));
  }
  return map;
}

std::optional<std::string> Gridmap::lookup(std::string_view subject_dn) const {
  const auto it = entries_.find(identity_dn(subject_dn));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string Gridmap::render() const {
  std::string out;
  for (const auto& [dn, user] : entries_) out += fmt::format("\"{}\" {}\n", dn, user);
  return out;
}

// ---------------------------------------------------------------------------
// Files

ProxyCredential load_proxy(const NodeFs& fs, const CredentialDir& creds) {
  const auto text = fs.read(creds.proxy_path());
  if (!text) throw Error(Errc::NoProxyFound, "no proxy credential found at " + creds.proxy_path());
  return decode_proxy(*text);
}

std::vector<Certificate> load_trust_anchors(const NodeFs& fs, const std::string& trust_dir) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(fs.host_path(trust_dir), ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pem") files.push_back(entry.path().filename());
  }
  std::sort(files.begin(), files.end());
  std::vector<Certificate> anchors;
  for (const auto& name : files) {
    if (auto text = fs.read(trust_dir + "/" + name.string())) {
      auto certs = certificates_from_pem(*text);
      anchors.insert(anchors.end(), certs.begin(), certs.end());
    }
  }
  return anchors;
}

}  // namespace minigrid::gsi
