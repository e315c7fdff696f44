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

#pragma once

// A small certificate authority, user certificates, pass-phrase protected
// keys, proxy credentials, chain verification with clock-skew tolerance, and
// the gridmap authorization table.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "minigrid/nodefs.hpp"
#include "minigrid/time.hpp"

namespace minigrid::gsi {

/// Source of key and nonce material.
class SeedSource {
 public:
  virtual ~SeedSource() = default;
  virtual void fill(std::span<unsigned char> out) = 0;
};

/// Operating-system randomness.
class SystemSeed : public SeedSource {
 public:
  void fill(std::span<unsigned char> out) override;
};

/// Reproducible material for the deterministic testbed and tests.
class DeterministicSeed : public SeedSource {
 public:
  explicit DeterministicSeed(std::uint64_t seed) : rng_(seed) {}
  void fill(std::span<unsigned char> out) override;

 private:
  std::mt19937_64 rng_;
};

struct Certificate {
  std::string subject_dn;
  std::string issuer_dn;
  Timestamp not_before;  // whole seconds
  Timestamp not_after;
  std::string key_id;      // hex digest of public_key
  std::string public_key;  // raw signing-key bytes
  std::string signature;   // raw signature bytes by the issuer's key

  /// The signed portion of the canonical encoding.
  std::string canonical_body() const;

  bool operator==(const Certificate&) const = default;
};

/// Canonical text encoding including the signature; decode is strict, so
/// decode(b) succeeds only when encode(decode(b)) == b.
std::string encode_certificate(const Certificate& cert);
Certificate decode_certificate(std::string_view bytes);

/// BEGIN/END armored base64 of the canonical encoding.
std::string certificate_to_pem(const Certificate& cert);
/// Every certificate block in `text`, in order; throws MalformedCertificate.
std::vector<Certificate> certificates_from_pem(std::string_view text);

/// An unencrypted signing key.
struct SecretKey {
  std::string key_id;
  std::string secret;  // raw secret-key bytes
  std::string public_key;
};

SecretKey generate_key(SeedSource& seed);

/// A secret key sealed under a pass-phrase-derived key.
struct PrivateKey {
  std::string key_id;
  std::string salt;
  std::string nonce;
  std::string ciphertext;
};

PrivateKey seal_key(const SecretKey& key, std::string_view passphrase, SeedSource& seed);
/// Throws Error(BadPassphrase) when the pass-phrase is wrong.
SecretKey open_key(const PrivateKey& key, std::string_view passphrase);

std::string private_key_to_pem(const PrivateKey& key);
PrivateKey private_key_from_pem(std::string_view text);
std::string secret_key_to_pem(const SecretKey& key);
SecretKey secret_key_from_pem(std::string_view text);

/// Signs a certificate for `subject_key` with `issuer_key`. Throws
/// InvalidLifetime unless not_before < not_after.
Certificate sign_certificate(std::string subject_dn, std::string issuer_dn, Timestamp not_before,
                             Timestamp not_after, std::string_view subject_public_key, const SecretKey& issuer_key);

/// "/O=Grid/OU=GlobusTest/OU=<name>/CN=Globus Simple CA"
std::string ca_subject(std::string_view name);

struct IssuedCredential {
  Certificate cert;
  PrivateKey key;
};

/// Simple CA state persisted in a directory as cacert.pem and cakey.pem.
class CertificateAuthority {
 public:
  /// Throws AlreadyInitialized when the directory already holds a CA.
  static CertificateAuthority init(const NodeFs& fs, const std::string& dir, std::string_view name, Timestamp now,
                                   SeedSource& seed, Duration lifetime = hours(24 * 365 * 5));
  static CertificateAuthority load(const NodeFs& fs, const std::string& dir);

  /// Throws InvalidLifetime for non-positive lifetimes. The certificate is
  /// clipped to the root's validity.
  IssuedCredential issue(std::string subject_dn, Duration lifetime, std::string_view passphrase, Timestamp now,
                         SeedSource& seed) const;

  const Certificate& root() const { return root_; }

 private:
  CertificateAuthority(Certificate root, SecretKey key) : root_(std::move(root)), key_(std::move(key)) {}

  Certificate root_;
  SecretKey key_;
};

inline constexpr std::string_view kProxySuffix = "/CN=proxy";
inline constexpr Duration kDefaultProxyLifetime = hours(12);
inline constexpr Duration kDefaultMaxSkew = seconds(300);

struct ProxyCredential {
  Certificate proxy_cert;
  SecretKey proxy_key;
  std::vector<Certificate> chain;  // [proxy_cert, user_cert]
};

/// Throws BadPassphrase, UserCertExpired, or InvalidLifetime. The proxy
/// window is [now, min(now + lifetime, user not_after)].
ProxyCredential proxy_init(const Certificate& user_cert, const PrivateKey& user_key, std::string_view passphrase,
                           Timestamp now, SeedSource& seed, Duration lifetime = kDefaultProxyLifetime);

/// A fresh credential signed by `proxy`, valid from the signer's `now`, as
/// sent with a remote request: chain [delegated, proxy, user].
ProxyCredential delegate(const ProxyCredential& proxy, Timestamp now, SeedSource& seed,
                         Duration lifetime = kDefaultProxyLifetime);

struct ProxyInfo {
  std::string subject;
  std::string issuer;
  Duration time_left{0};
  bool expired = false;
};

ProxyInfo proxy_info(const ProxyCredential& proxy, Timestamp now);

/// Proxy file: proxy certificate, its unencrypted key, then the rest of the chain.
std::string encode_proxy(const ProxyCredential& proxy);
ProxyCredential decode_proxy(std::string_view text);

/// Ok, or throws FutureCertificate, Expired, UnknownIssuer, BadSignature,
/// or AuthFailed (empty chain). Signatures are checked first, then issuer
/// linkage to a trust anchor, then validity windows widened by max_skew.
void verify_chain(std::span<const Certificate> chain, std::span<const Certificate> anchors, Timestamp now,
                  Duration max_skew);

/// The identity a chain speaks for: chain[0]'s subject with exactly one
/// trailing "/CN=proxy" removed.
std::string identity_dn(std::string_view subject_dn);

class Gridmap {
 public:
  /// Lines `"<DN>" <user>`; blank lines and `#` comments ignored. Throws
  /// ParseError with the line number.
  static Gridmap parse(std::string_view text);

  void add(std::string dn, std::string user) { entries_[std::move(dn)] = std::move(user); }
  /// Looks up identity_dn(subject_dn).
  std::optional<std::string> lookup(std::string_view subject_dn) const;
  std::string render() const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

/// Per-user credential directory layout.
struct CredentialDir {
  std::string dir;

  std::string cert_path() const { return dir + "/usercert.pem"; }
  std::string key_path() const { return dir + "/userkey.pem"; }
  std::string proxy_path() const { return dir + "/proxy.pem"; }
};

/// Throws NoProxyFound (with remediation) when no proxy file exists.
ProxyCredential load_proxy(const NodeFs& fs, const CredentialDir& creds);

/// Every certificate in *.pem files directly inside `trust_dir`, by file name.
std::vector<Certificate> load_trust_anchors(const NodeFs& fs, const std::string& trust_dir);

}  // namespace minigrid::gsi
