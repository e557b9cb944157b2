#include "mapprior/pnm.h"

#include <fstream>

#include <fmt/format.h>

#include "mapprior/errors.h"

namespace mapprior {
namespace {

// Next header token, skipping whitespace and '#' comments.
std::string Token(std::istream& in) {
  std::string token;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(c));
  }
  return token;
}

}  // namespace

ImageU8 ReadPnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open image: " + path);
  const std::string magic = Token(in);
  ImageU8 image;
  if (magic == "P5") {
    image.channels = 1;
  } else if (magic == "P6") {
    image.channels = 3;
  } else {
    throw InputError(path + ": only binary PGM/PPM (P5/P6) is supported");
  }
  try {
    image.width = std::stoi(Token(in));
    image.height = std::stoi(Token(in));
    if (std::stoi(Token(in)) != 255) {
      throw InputError(path + ": only maxval 255 is supported");
    }
  } catch (const std::logic_error&) {
    throw InputError(path + ": malformed PNM header");
  }
  if (image.width <= 0 || image.height <= 0) {
    throw InputError(path + ": bad image size");
  }
  image.data.resize(static_cast<std::size_t>(image.width) * image.height *
                    image.channels);
  if (!in.read(reinterpret_cast<char*>(image.data.data()),
               static_cast<std::streamsize>(image.data.size()))) {
    throw InputError(path + ": truncated pixel data");
  }
  return image;
}

void WritePnm(const std::string& path, const ImageU8& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw InputError("PNM output needs 1 or 3 channels");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write image: " + path);
  out << fmt::format("{}\n{} {}\n255\n", image.channels == 1 ? "P5" : "P6",
                     image.width, image.height);
  out.write(reinterpret_cast<const char*>(image.data.data()),
            static_cast<std::streamsize>(image.data.size()));
  if (!out) throw InputError("failed writing image: " + path);
}

}  // namespace mapprior
