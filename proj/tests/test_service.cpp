#include <doctest.h>

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <thread>

#include <json.hpp>

#include "fixtures.hpp"
#include "spectex/image_io.hpp"
#include "spectex/pipeline.hpp"
#include "spectex/service.hpp"
#include "spectex/tvflow.hpp"

using namespace spectex;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Service on a free port, served from a background thread.
class Running {
 public:
  explicit Running(ServiceOptions options) : service_(std::move(options)) {
    port_ = service_.bind();
    thread_ = std::thread([this] { service_.run(); });
  }
  ~Running() {
    service_.stop();
    thread_.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(300, 0);
    return c;
  }
  Service& service() { return service_; }

 private:
  Service service_;
  int port_ = 0;
  std::thread thread_;
};

ServiceOptions small_options() {
  ServiceOptions o;
  o.port = 0;
  o.defaults.grid.steps = 30;
  return o;
}

std::string bytes_of(const ScalarField& f) {
  const Bytes b = encode_pgm16(f);
  return std::string(b.begin(), b.end());
}

Bytes as_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

ScalarField decoded_luma(const std::string& png) {
  return decode_image(std::span(reinterpret_cast<const std::uint8_t*>(png.data()), png.size()))
      .luma();
}

std::string create(httplib::Client& c, const ScalarField& f, json* payload = nullptr) {
  auto res = c.Post("/sessions", bytes_of(f), "image/x-portable-graymap");
  REQUIRE(res);
  REQUIRE(res->status == 201);
  const json j = json::parse(res->body);
  if (payload) *payload = j;
  return j.at("id").get<std::string>();
}

std::string post_json(httplib::Client& c, const std::string& path, const json& body,
                      int expect = 200) {
  auto res = c.Post(path, body.dump(), "application/json");
  REQUIRE(res);
  CHECK_MESSAGE(res->status == expect, res->body);
  return res->body;
}

// Spectrum argmax from the JSON payload.
double peak_time(const json& s) {
  const auto& v = s.at("S");
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k].get<double>() > v[best].get<double>()) best = k;
  }
  return s.at("t")[best].get<double>();
}

const ScalarField& disc() {
  static const ScalarField f = fixtures::disc_image(64, 8, 1.0, 0.0);
  return f;
}

const ScalarField& stripes() {
  static const ScalarField f = fixtures::edge_matched_stripes(64);
  return f;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SPECTEX_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("sessions report their spectrum") {
  Running svc(small_options());
  auto c = svc.client();

  json flat;
  const std::string a = create(c, ScalarField(32, 32, 0.4), &flat);
  CHECK(flat["width"] == 32);
  CHECK(flat["times"].size() == 31);
  for (const auto& v : flat["spectrum"]["S"]) CHECK(v.get<double>() == 0.0);

  json payload;
  const std::string b = create(c, disc(), &payload);
  CHECK(a != b);
  CHECK(svc.service().session_count() == 2);

  // Disc extinction from its raster: h / (P/A + P/(|Ω| − A)).
  double area = 0.0;
  for (double v : disc().values()) area += v;
  const double p = tv_energy(disc());
  const double t_star = 1.0 / (p / area + p / (64.0 * 64.0 - area));
  CHECK(peak_time(payload["spectrum"]) == doctest::Approx(t_star).epsilon(0.2));

  auto res = c.Get("/sessions/" + b + "/spectrum");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body) == payload["spectrum"]);

  res = c.Get("/sessions/" + b + "/spectrum?format=csv");
  REQUIRE(res);
  CHECK(res->get_header_value("Content-Type") == "text/csv");
  CHECK(res->body.rfind("t,S\n", 0) == 0);
}

TEST_CASE("session grid comes from the query") {
  Running svc(small_options());
  auto c = svc.client();
  auto res = c.Post("/sessions?grid=uniform&t_max=4&steps=12", bytes_of(disc()), "image/x-portable-graymap");
  REQUIRE(res);
  REQUIRE(res->status == 201);
  const json j = json::parse(res->body);
  CHECK(j["times"].size() == 13);
  CHECK(j["times"][3].get<double>() == doctest::Approx(1.0));

  res = c.Post("/sessions?steps=lots", bytes_of(disc()), "image/x-portable-graymap");
  REQUIRE(res);
  CHECK(res->status == 400);
  res = c.Post("/sessions?t_min=5&t_max=1", bytes_of(disc()), "image/x-portable-graymap");
  REQUIRE(res);
  CHECK(res->status == 400);
}

TEST_CASE("band filter") {
  Running svc(small_options());
  auto c = svc.client();
  const std::string id = create(c, stripes());
  const std::string path = "/sessions/" + id + "/filter";

  const std::string full = post_json(c, path, {{"t1", 0.0}, {"t2", 100.0}, {"residual", true}});
  CHECK(max_abs_diff(decoded_luma(full), stripes()) <= 0.02);

  auto res = c.Post(path, json{{"t1", 50.0}, {"t2", 60.0}}.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->get_header_value("Content-Type") == "image/png");
  CHECK(res->get_header_value("X-Band-Layers") == "0");
  const ScalarField gray = decoded_luma(res->body);
  CHECK(gray.min() == gray.max());
  CHECK(std::abs(gray.min() - 0.5) <= 0.5 / 255);

  // Identical requests give identical bytes.
  const std::string once = post_json(c, path, {{"t1", 0.2}, {"t2", 2.0}});
  CHECK(post_json(c, path, {{"t1", 0.2}, {"t2", 2.0}}) == once);

  post_json(c, path, {{"t1", 1.0}}, 400);
  post_json(c, path, {{"t1", "a"}, {"t2", 2.0}}, 400);
  post_json(c, path, {{"t1", 3.0}, {"t2", 2.0}}, 400);
  res = c.Post(path, "{not json", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  CHECK(json::parse(res->body).contains("detail"));
}

TEST_CASE("stratum parts and manipulation") {
  Running svc(small_options());
  auto c = svc.client();
  const std::string id = create(c, stripes());
  const std::string stratum = "/sessions/" + id + "/stratum";
  const std::string manip = "/sessions/" + id + "/manipulate";
  const json band{{"t1", 0.05}, {"t2", 8.0}};

  const json manifest = json::parse(post_json(c, stratum, band));
  CHECK(manifest["band"] == json{0.05, 8.0});
  CHECK(manifest["fit"]["kind"] == "plane");

  json part = band;
  part["part"] = "texture.f32";
  const std::string raw = post_json(c, stratum, part);
  const ScalarField texture =
      decode_raw_f32(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()), 64, 64);
  CHECK(fixtures::projection_ratio(texture, stripes()) >= 0.9);

  part["part"] = "residual";
  const std::string residual = post_json(c, stratum, part);
  part["part"] = "texture";
  CHECK(!post_json(c, stratum, part).empty());
  part["part"] = "nothing";
  post_json(c, stratum, part, 400);
  post_json(c, stratum, {{"t1", 2.0}, {"t2", 2.0}}, 400);
  post_json(c, stratum, {{"t1", 0.1}, {"t2", 4.0}, {"steps", 10}}, 400);
  post_json(c, stratum, {{"t1", 0.1}, {"t2", 4.0}, {"alhpa", 0.3}}, 400);

  json g = band;
  g["gain"] = 0.0;
  CHECK(post_json(c, manip, g) == residual);
  g["gain"] = 1.0;
  CHECK(max_abs_diff(decoded_luma(post_json(c, manip, g)), stripes()) <= 0.5 / 255 + 1e-9);

  // Multipart: params plus a mask covering the left half.
  ScalarField mask(64, 64, 0.0);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 32; ++x) mask(x, y) = 1.0;
  }
  g["gain"] = 0.0;
  const Bytes mask_png = encode_png(mask);
  httplib::MultipartFormDataItems items{
      {"params", g.dump(), "", "application/json"},
      {"mask", std::string(mask_png.begin(), mask_png.end()), "mask.png", "image/png"}};
  auto res = c.Post(manip, items);
  REQUIRE(res);
  REQUIRE(res->status == 200);
  const ScalarField out = decoded_luma(res->body);
  const ScalarField removed = decoded_luma(residual);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      REQUIRE(std::abs(out(x, y) - (x < 32 ? removed(x, y) : stripes()(x, y))) <= 0.5 / 255 + 1e-9);
    }
  }

  const Bytes small = encode_png(ScalarField(8, 8, 1.0));
  httplib::MultipartFormDataItems wrong{
      {"params", g.dump(), "", "application/json"},
      {"mask", std::string(small.begin(), small.end()), "mask.png", "image/png"}};
  res = c.Post(manip, wrong);
  REQUIRE(res);
  CHECK(res->status == 422);
}

TEST_CASE("error statuses") {
  ServiceOptions o = small_options();
  o.max_upload_bytes = 20000;
  o.max_pixels = 80 * 80;
  o.max_sessions = 2;
  Running svc(o);
  auto c = svc.client();

  auto res = c.Get("/sessions/00ff/spectrum");
  REQUIRE(res);
  CHECK(res->status == 404);
  CHECK(json::parse(res->body)["error"] == "not_found");

  res = c.Post("/sessions", "not an image", "application/octet-stream");
  REQUIRE(res);
  CHECK(res->status == 422);

  res = c.Post("/sessions", std::string(30000, 'x'), "application/octet-stream");
  REQUIRE(res);
  CHECK(res->status == 413);
  const Bytes big = encode_png(ScalarField(96, 96, 0.5));
  REQUIRE(big.size() < 20000);
  res = c.Post("/sessions", std::string(big.begin(), big.end()), "image/png");
  REQUIRE(res);
  CHECK(res->status == 413);

  // A constant image has no salient pixels to fit.
  const std::string flat = create(c, ScalarField(32, 32, 0.5));
  post_json(c, "/sessions/" + flat + "/stratum", {{"t1", 0.1}, {"t2", 4.0}}, 422);

  create(c, stripes());
  res = c.Post("/sessions", bytes_of(disc()), "image/x-portable-graymap");
  REQUIRE(res);
  CHECK(res->status == 503);

  res = c.Delete("/sessions/" + flat);
  REQUIRE(res);
  CHECK(res->status == 204);
  res = c.Delete("/sessions/" + flat);
  REQUIRE(res);
  CHECK(res->status == 404);
  CHECK(svc.service().session_count() == 1);
  create(c, disc());
}

TEST_CASE("service output matches the command line") {
  const fs::path dir = fs::temp_directory_path() / "spectex_test_service_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_file(dir / "in.pgm", as_bytes(bytes_of(stripes())));
  const std::string grid = " --steps 30";
  REQUIRE(run_cli("transform " + (dir / "in.pgm").string() + grid + " --out " +
                  (dir / "t").string()) == 0);
  REQUIRE(run_cli("decompose " + (dir / "in.pgm").string() + grid +
                  " --band-lo 0.05 --band-hi 8 --out " + (dir / "d").string()) == 0);
  REQUIRE(run_cli("manipulate " + (dir / "in.pgm").string() + grid +
                  " --band-lo 0.05 --band-hi 8 --gain -1 --out " + (dir / "m").string()) == 0);

  Running svc(small_options());
  auto c = svc.client();
  const std::string id = create(c, stripes());
  auto res = c.Get("/sessions/" + id + "/spectrum?format=csv");
  REQUIRE(res);
  CHECK(as_bytes(res->body) == read_file(dir / "t" / "spectrum.csv"));

  const std::string stratum = "/sessions/" + id + "/stratum";
  const json band{{"t1", 0.05}, {"t2", 8.0}};
  for (const char* part : {"texture", "residual", "surface.f32", "stratum_lo.f32", "time_map.png"}) {
    json q = band;
    q["part"] = part;
    const std::string file = std::string(part) + (std::string(part).find('.') == std::string::npos ? ".png" : "");
    CHECK_MESSAGE(as_bytes(post_json(c, stratum, q)) == read_file(dir / "d" / file), part);
  }
  json q = band;
  q["gain"] = -1.0;
  CHECK(as_bytes(post_json(c, "/sessions/" + id + "/manipulate", q)) ==
        read_file(dir / "m" / "output.png"));
}
