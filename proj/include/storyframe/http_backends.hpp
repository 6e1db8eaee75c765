#pragma once

// JSON-over-HTTP adapters for live model services.
//
//   chat:      POST {model, messages: [{role, content, images: [base64 PNG]}], temperature, seed?}
//              -> {content}
//   image:     POST {prompt, width, height, seed, steps?, guidance?} -> {image: base64 PNG}
//   embedding: POST {kind: "text"|"image", payload} -> {vector: [float]}
//              (payload is the text or a base64 PNG)
//
// Transport failures and non-2xx replies throw Error(BackendError); replies
// that parse but break the contract throw Error(BackendContract).

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "storyframe/chat.hpp"
#include "storyframe/config.hpp"
#include "storyframe/evaluation.hpp"
#include "storyframe/generation.hpp"

namespace storyframe {

// Turns an attachment reference into PNG bytes.
using AttachmentResolver = std::function<std::vector<std::uint8_t>(const std::string& ref)>;

// Reads the reference as a file path.
AttachmentResolver file_attachment_resolver();

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

// Throws InvalidArgument for anything but http:// URLs.
Endpoint parse_endpoint(const std::string& url);

class HttpChatBackend : public ChatBackend {
 public:
  HttpChatBackend(BackendSettings settings, double temperature, std::optional<std::uint64_t> seed,
                  AttachmentResolver resolver = file_attachment_resolver());
  std::string complete(const MessageList& messages) override;
  int max_concurrency() const override { return settings_.max_concurrency; }

 private:
  BackendSettings settings_;
  Endpoint endpoint_;
  double temperature_;
  std::optional<std::uint64_t> seed_;
  AttachmentResolver resolver_;
};

class HttpImageGenBackend : public ImageGenBackend {
 public:
  explicit HttpImageGenBackend(BackendSettings settings, std::optional<int> steps = std::nullopt,
                               std::optional<double> guidance = std::nullopt);
  Image generate(const std::string& prompt, int width, int height, std::uint64_t seed) override;
  int max_concurrency() const override { return settings_.max_concurrency; }

 private:
  BackendSettings settings_;
  Endpoint endpoint_;
  std::optional<int> steps_;
  std::optional<double> guidance_;
};

class HttpEmbeddingBackend : public EmbeddingBackend {
 public:
  HttpEmbeddingBackend(BackendSettings settings, int dimension);
  std::vector<double> embed_text(const std::string& text) override;
  std::vector<double> embed_image(const Image& image) override;
  int dimension() const override { return dimension_; }
  int max_concurrency() const override { return settings_.max_concurrency; }

 private:
  std::vector<double> request(const std::string& kind, const std::string& payload);

  BackendSettings settings_;
  Endpoint endpoint_;
  int dimension_;
};

}  // namespace storyframe
