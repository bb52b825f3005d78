#include "spectex/service.hpp"

#include <httplib.h>

#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <unordered_map>

#include "spectex/errors.hpp"
#include "spectex/image_io.hpp"
#include "spectex/pipeline.hpp"
#include "spectex/spectral.hpp"
#include "spectex/texture_ops.hpp"

namespace spectex {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct HttpError : std::runtime_error {
  HttpError(int status, std::string kind, const std::string& detail)
      : std::runtime_error(detail), status(status), kind(std::move(kind)) {}
  int status;
  std::string kind;
};

struct Session {
  Session(std::string id, ColorImage source, RunConfig config)
      : id(std::move(id)), source(std::move(source)), config(std::move(config)),
        created(Clock::now()), last_access(created) {}

  std::string id;
  ColorImage source;
  std::shared_ptr<const SpectralStack> stack;
  RunConfig config;  // grid used for the stack plus request defaults
  Clock::time_point created;
  Clock::time_point last_access;

  // Most recent decomposition, so that fetching several parts of one result
  // does not recompute it.
  std::mutex cache_mutex;
  std::string cache_key;
  std::shared_ptr<const DecomposeRun> cache;
};

std::string random_id() {
  static std::mutex mutex;
  static std::random_device rd;
  static std::mt19937_64 rng(rd());
  std::lock_guard lock(mutex);
  std::ostringstream os;
  os << std::hex << std::setfill('0') << std::setw(16) << rng() << std::setw(16) << rng();
  return os.str();
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind,
                const std::string& detail) {
  send_json(res, status, json{{"error", kind}, {"detail", detail}});
}

void send_bytes(httplib::Response& res, const Bytes& bytes, const char* type) {
  res.status = 200;
  res.set_content(std::string(bytes.begin(), bytes.end()), type);
}

json parse_body(const std::string& text) {
  if (text.empty()) return json::object();
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw HttpError(400, "bad_request", "request body must be a JSON object");
  }
  return j;
}

// Request keys t1/t2 map to the band; grid keys are fixed by the session.
RunConfig request_config(const RunConfig& base, json body) {
  for (const char* key : {"grid", "t_min", "t_max", "steps", "solver", "max_inner_iters",
                          "dual_step", "inner_tol", "out", "mask"}) {
    if (body.contains(key)) {
      throw HttpError(400, "bad_request", std::string("'") + key + "' cannot be set per request");
    }
  }
  if (body.contains("t1")) body["band_lo"] = body["t1"];
  if (body.contains("t2")) body["band_hi"] = body["t2"];
  for (const char* key : {"t1", "t2", "part", "residual"}) body.erase(key);
  RunConfig c = merge_json(base, body);
  c.validate();
  return c;
}

}  // namespace

struct Service::Impl {
  explicit Impl(ServiceOptions o) : options(std::move(o)) {}

  ServiceOptions options;
  httplib::Server server;
  mutable std::mutex table_mutex;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions;

  void sweep_locked(Clock::time_point now) {
    for (auto it = sessions.begin(); it != sessions.end();) {
      if (now - it->second->last_access > options.session_ttl) {
        it = sessions.erase(it);
      } else {
        ++it;
      }
    }
  }

  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard lock(table_mutex);
    const auto now = Clock::now();
    sweep_locked(now);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw HttpError(404, "not_found", "unknown session " + id);
    it->second->last_access = now;
    return it->second;
  }

  template <typename Handler>
  httplib::Server::Handler guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const HttpError& e) {
        send_error(res, e.status, e.kind, e.what());
      } catch (const std::exception& e) {
        switch (classify(e)) {
          case ExitCode::insufficient_data:
            send_error(res, 422, "insufficient_data", e.what());
            break;
          case ExitCode::invalid_config:
            send_error(res, 400, "invalid_parameters", e.what());
            break;
          default:
            send_error(res, 500, "internal", e.what());
        }
      }
    };
  }

  void create_session(const httplib::Request& req, httplib::Response& res) {
    std::string body = req.body;
    if (req.is_multipart_form_data()) {
      if (!req.has_file("image")) throw HttpError(400, "bad_request", "multipart upload needs an 'image' part");
      body = req.get_file_value("image").content;
    }
    if (body.size() > options.max_upload_bytes) {
      throw HttpError(413, "too_large", "upload exceeds the size limit");
    }
    RunConfig config = options.defaults;
    json grid = json::object();
    for (const char* key : {"t_min", "t_max", "steps"}) {
      if (!req.has_param(key)) continue;
      const std::string v = req.get_param_value(key);
      try {
        if (std::string(key) == "steps") {
          grid[key] = std::stoi(v);
        } else {
          grid[key] = std::stod(v);
        }
      } catch (const std::exception&) {
        throw HttpError(400, "invalid_parameters", std::string("bad value for ") + key);
      }
    }
    if (req.has_param("grid")) grid["grid"] = req.get_param_value("grid");
    config = merge_json(config, grid);
    config.grid.validate();

    std::optional<ColorImage> image;
    try {
      image = decode_image(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
    } catch (const Error& e) {
      throw HttpError(422, "bad_image", e.what());
    }
    if (static_cast<std::size_t>(image->width()) * image->height() > options.max_pixels) {
      throw HttpError(413, "too_large", "image exceeds the pixel limit");
    }

    auto session = std::make_shared<Session>(random_id(), *image, config);
    session->stack = std::make_shared<const SpectralStack>(
        transform(image->luma(), config.grid.make(), config.flow));

    const Spectrum s = spectrum(*session->stack);
    {
      std::lock_guard lock(table_mutex);
      sweep_locked(Clock::now());
      if (sessions.size() >= options.max_sessions) {
        throw HttpError(503, "busy", "session limit reached");
      }
      sessions.emplace(session->id, session);
    }
    json out{{"id", session->id},
             {"width", image->width()},
             {"height", image->height()},
             {"converged", session->stack->converged},
             {"times", session->stack->grid.times()},
             {"spectrum", spectrum_json(s)},
             {"config", to_json(config)}};
    send_json(res, 201, out);
  }

  void get_spectrum(const httplib::Request& req, httplib::Response& res) {
    auto session = find(req.matches[1]);
    const Spectrum s = spectrum(*session->stack);
    if (req.has_param("format") && req.get_param_value("format") == "csv") {
      res.set_content(spectrum_csv(s), "text/csv");
      return;
    }
    send_json(res, 200, spectrum_json(s));
  }

  void band_filter(const httplib::Request& req, httplib::Response& res) {
    auto session = find(req.matches[1]);
    const json body = parse_body(req.body);
    if (!body.contains("t1") || !body.contains("t2")) {
      throw HttpError(400, "bad_request", "filter needs t1 and t2");
    }
    double t1 = 0.0, t2 = 0.0;
    bool residual = false;
    try {
      t1 = body.at("t1").get<double>();
      t2 = body.at("t2").get<double>();
      residual = body.value("residual", false);
    } catch (const json::exception&) {
      throw HttpError(400, "bad_request", "t1, t2 must be numbers and residual a bool");
    }
    const BandRender band = render_band(*session->stack, t1, t2, residual);
    res.set_header("X-Band-Energy", std::to_string(band.energy));
    res.set_header("X-Band-Mass-Fraction", std::to_string(band.mass_fraction));
    res.set_header("X-Band-Layers", std::to_string(band.layers));
    send_bytes(res, band.png, "image/png");
  }

  std::shared_ptr<const DecomposeRun> decomposition(Session& session, const RunConfig& config) {
    const std::string key = to_json(config).dump();
    std::lock_guard lock(session.cache_mutex);
    if (session.cache && session.cache_key == key) return session.cache;
    auto run = std::make_shared<const DecomposeRun>(
        run_decompose(session.source, *session.stack, config));
    session.cache_key = key;
    session.cache = run;
    return run;
  }

  void stratum(const httplib::Request& req, httplib::Response& res) {
    auto session = find(req.matches[1]);
    const json body = parse_body(req.body);
    const RunConfig config = request_config(session->config, body);
    const std::string part = body.value("part", std::string("manifest"));
    const auto run = decomposition(*session, config);
    if (part == "manifest") {
      send_json(res, 200, run->manifest);
    } else if (part == "texture") {
      send_bytes(res, run->texture_png, "image/png");
    } else if (part == "residual") {
      send_bytes(res, run->residual_png, "image/png");
    } else if (auto it = run->rasters.find(part); it != run->rasters.end()) {
      const bool png = part.size() > 4 && part.substr(part.size() - 4) == ".png";
      send_bytes(res, it->second, png ? "image/png" : "application/octet-stream");
    } else {
      throw HttpError(400, "bad_request", "unknown part '" + part + "'");
    }
  }

  void manipulate(const httplib::Request& req, httplib::Response& res) {
    auto session = find(req.matches[1]);
    json body;
    std::optional<ScalarField> mask;
    if (req.is_multipart_form_data()) {
      body = req.has_file("params") ? parse_body(req.get_file_value("params").content)
                                    : json::object();
      if (req.has_file("mask")) {
        const std::string raw = req.get_file_value("mask").content;
        try {
          mask = mask_from_image(
              decode_image(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size())));
        } catch (const Error& e) {
          throw HttpError(422, "bad_image", std::string("mask: ") + e.what());
        }
        if (mask->width() != session->source.width() || mask->height() != session->source.height()) {
          throw HttpError(422, "bad_image", "mask size differs from the image");
        }
      }
    } else {
      body = parse_body(req.body);
    }
    const RunConfig config = request_config(session->config, body);
    const auto run = decomposition(*session, config);
    ManipulationSpec spec{config.gain, mask, config.clamp};
    send_bytes(res, encode_png(spectex::manipulate(session->source, run->d.texture, spec)), "image/png");
  }

  void remove(const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(table_mutex);
    if (sessions.erase(req.matches[1]) == 0) {
      throw HttpError(404, "not_found", "unknown session " + std::string(req.matches[1]));
    }
    res.status = 204;
  }

  void install() {
    server.set_payload_max_length(options.max_upload_bytes + (1u << 16));
    server.Post("/sessions", guarded([this](const auto& q, auto& r) { create_session(q, r); }));
    server.Get(R"(/sessions/([0-9a-f]+)/spectrum)",
               guarded([this](const auto& q, auto& r) { get_spectrum(q, r); }));
    server.Post(R"(/sessions/([0-9a-f]+)/filter)",
                guarded([this](const auto& q, auto& r) { band_filter(q, r); }));
    server.Post(R"(/sessions/([0-9a-f]+)/stratum)",
                guarded([this](const auto& q, auto& r) { stratum(q, r); }));
    server.Post(R"(/sessions/([0-9a-f]+)/manipulate)",
                guarded([this](const auto& q, auto& r) { manipulate(q, r); }));
    server.Delete(R"(/sessions/([0-9a-f]+))",
                  guarded([this](const auto& q, auto& r) { remove(q, r); }));
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const std::string kind = res.status == 413 ? "too_large"
                               : res.status == 404 ? "not_found"
                                                   : "http_error";
      send_error(res, res.status, kind, httplib::status_message(res.status));
    });
    if (!options.static_dir.empty() && !server.set_mount_point("/", options.static_dir.string())) {
      throw IoError("static directory " + options.static_dir.string() + " is not readable");
    }
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
  impl_->options.defaults.validate();
  impl_->install();
}

Service::~Service() { stop(); }

int Service::bind() {
  Impl& s = *impl_;
  if (s.options.port == 0) {
    const int port = s.server.bind_to_any_port(s.options.host);
    if (port < 0) throw IoError("cannot bind " + s.options.host);
    s.options.port = port;
  } else if (!s.server.bind_to_port(s.options.host, s.options.port)) {
    throw IoError("cannot bind " + s.options.host + ":" + std::to_string(s.options.port));
  }
  return s.options.port;
}

void Service::run() {
  if (!impl_->server.listen_after_bind()) throw IoError("service stopped with an error");
}

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

std::size_t Service::session_count() const {
  std::lock_guard lock(impl_->table_mutex);
  return impl_->sessions.size();
}

}  // namespace spectex
