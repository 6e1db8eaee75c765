#include "storyframe/http_backends.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "storyframe/encoding.hpp"
#include "storyframe/error.hpp"
#include "storyframe/fs_util.hpp"

namespace storyframe {

AttachmentResolver file_attachment_resolver() {
  return [](const std::string& ref) {
    const std::string data = read_file(ref);
    return std::vector<std::uint8_t>(data.begin(), data.end());
  };
}

Endpoint parse_endpoint(const std::string& url) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) throw Error(Errc::InvalidArgument, "only http:// endpoints are supported: " + url);
  const auto slash = url.find('/', scheme.size());
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

namespace {

nlohmann::json post_json(const Endpoint& endpoint, const BackendSettings& settings, const nlohmann::json& body) {
  httplib::Client client(endpoint.origin);
  client.set_connection_timeout(settings.timeout_seconds);
  client.set_read_timeout(settings.timeout_seconds);
  client.set_write_timeout(settings.timeout_seconds);
  httplib::Headers headers;
  if (!settings.api_key.empty()) headers.emplace("Authorization", "Bearer " + settings.api_key);
  const auto res = client.Post(endpoint.path, headers, body.dump(), "application/json");
  if (!res) {
    throw Error(Errc::BackendError, endpoint.origin + endpoint.path + ": " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(Errc::BackendError, endpoint.origin + endpoint.path + " replied " + std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BackendContract, "reply is not JSON: " + std::string(e.what()));
  }
}

}  // namespace

HttpChatBackend::HttpChatBackend(BackendSettings settings, double temperature, std::optional<std::uint64_t> seed,
                                 AttachmentResolver resolver)
    : settings_(std::move(settings)),
      endpoint_(parse_endpoint(settings_.endpoint)),
      temperature_(temperature),
      seed_(seed),
      resolver_(std::move(resolver)) {}

std::string HttpChatBackend::complete(const MessageList& messages) {
  nlohmann::json body{{"model", settings_.model}, {"temperature", temperature_}};
  if (seed_) body["seed"] = *seed_;
  auto& list = body["messages"] = nlohmann::json::array();
  for (const auto& m : messages) {
    nlohmann::json entry{{"role", to_string(m.role)}, {"content", m.content}};
    if (!m.attachments.empty()) {
      auto& images = entry["images"] = nlohmann::json::array();
      for (const auto& ref : m.attachments) images.push_back(base64_encode(resolver_(ref)));
    }
    list.push_back(std::move(entry));
  }
  const auto reply = post_json(endpoint_, settings_, body);
  if (!reply.contains("content") || !reply["content"].is_string()) {
    throw Error(Errc::BackendContract, "chat reply lacks a string 'content'");
  }
  return reply["content"].get<std::string>();
}

HttpImageGenBackend::HttpImageGenBackend(BackendSettings settings, std::optional<int> steps,
                                         std::optional<double> guidance)
    : settings_(std::move(settings)), endpoint_(parse_endpoint(settings_.endpoint)), steps_(steps), guidance_(guidance) {}

Image HttpImageGenBackend::generate(const std::string& prompt, int width, int height, std::uint64_t seed) {
  nlohmann::json body{{"prompt", prompt}, {"width", width}, {"height", height}, {"seed", seed}};
  if (steps_) body["steps"] = *steps_;
  if (guidance_) body["guidance"] = *guidance_;
  const auto reply = post_json(endpoint_, settings_, body);
  if (!reply.contains("image") || !reply["image"].is_string()) {
    throw Error(Errc::BackendContract, "image reply lacks a base64 'image'");
  }
  return decode_png(base64_decode(reply["image"].get<std::string>()));
}

HttpEmbeddingBackend::HttpEmbeddingBackend(BackendSettings settings, int dimension)
    : settings_(std::move(settings)), endpoint_(parse_endpoint(settings_.endpoint)), dimension_(dimension) {}

std::vector<double> HttpEmbeddingBackend::request(const std::string& kind, const std::string& payload) {
  const auto reply = post_json(endpoint_, settings_, {{"kind", kind}, {"payload", payload}});
  if (!reply.contains("vector") || !reply["vector"].is_array()) {
    throw Error(Errc::BackendContract, "embedding reply lacks 'vector'");
  }
  auto v = reply["vector"].get<std::vector<double>>();
  if (dimension_ > 0 && static_cast<int>(v.size()) != dimension_) {
    throw Error(Errc::BackendContract, "embedding has " + std::to_string(v.size()) + " dimensions, expected " +
                                           std::to_string(dimension_));
  }
  return v;
}

std::vector<double> HttpEmbeddingBackend::embed_text(const std::string& text) { return request("text", text); }

std::vector<double> HttpEmbeddingBackend::embed_image(const Image& image) {
  return request("image", base64_encode(encode_png(image)));
}

}  // namespace storyframe
