#ifndef SPECTEX_SERVICE_HPP_
#define SPECTEX_SERVICE_HPP_

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>

#include "spectex/run_config.hpp"

namespace spectex {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::size_t max_upload_bytes = 32u << 20;
  std::size_t max_pixels = 1024 * 1024;
  std::chrono::seconds session_ttl{30 * 60};
  std::size_t max_sessions = 64;
  /// Defaults for requests; the grid part applies to new sessions.
  RunConfig defaults;
  /// Optional directory served at `/` (the browser front end).
  std::filesystem::path static_dir;
};

/// HTTP facade over the pipeline. Each uploaded image becomes a session that
/// keeps its spectral stack; later queries only re-integrate layers.
///
///   POST   /sessions                 raw image body (or multipart `image`);
///                                    grid from query t_min, t_max, steps, grid
///   GET    /sessions/{id}/spectrum   JSON, or CSV with ?format=csv
///   POST   /sessions/{id}/filter     {t1, t2, residual} → PNG
///   POST   /sessions/{id}/stratum    {t1, t2, fit, alpha, …, part} → JSON or PNG/raster
///   POST   /sessions/{id}/manipulate {t1, t2, gain, …} or multipart params + mask → PNG
///   DELETE /sessions/{id}
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the socket and returns the bound port.
  int bind();
  /// Serves until stop(); call after bind().
  void run();
  void stop();

  std::size_t session_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace spectex

#endif  // SPECTEX_SERVICE_HPP_
