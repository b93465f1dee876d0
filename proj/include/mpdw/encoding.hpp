/*
 * Copyright 2026 The mpdw Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <iconv.h>

#include <cerrno>
#include <memory>
#include <string>
#include <string_view>

#include "mpdw/common.hpp"

namespace mpdw {

/// Converts between a source codepage and UTF-8, the internal text encoding.
/// Supported labels: utf-8, ascii, latin1 (iso-8859-1), cp1252, cp1256.
/// All of them are ASCII supersets, so pure-ASCII input skips iconv.
class Codec {
 public:
  explicit Codec(std::string_view label) : label_(label) {
    std::string key;
    for (char c : casefold(label)) {
      if (c != '-' && c != '_') key += c;
    }
    if (key == "utf8") {
      charset_ = "UTF-8";
    } else if (key == "ascii" || key == "usascii") {
      charset_ = "ASCII";
    } else if (key == "latin1" || key == "iso88591") {
      charset_ = "ISO-8859-1";
    } else if (key == "cp1252" || key == "windows1252") {
      charset_ = "CP1252";
    } else if (key == "cp1256" || key == "windows1256") {
      charset_ = "CP1256";
    } else {
      throw Error(ErrorCode::config_error, "unsupported encoding label '" + std::string(label) + "'");
    }
  }

  const std::string& label() const { return label_; }

  std::string decode(std::string_view bytes) const {
    if (is_ascii(bytes)) return std::string(bytes);
    return convert(to_utf8_, charset_.c_str(), "UTF-8", bytes);
  }

  std::string encode(std::string_view utf8) const {
    if (is_ascii(utf8)) return std::string(utf8);
    return convert(from_utf8_, "UTF-8", charset_.c_str(), utf8);
  }

 private:
  struct IconvCloser {
    void operator()(void* cd) const { iconv_close(static_cast<iconv_t>(cd)); }
  };
  using Handle = std::unique_ptr<void, IconvCloser>;

  static bool is_ascii(std::string_view s) {
    for (unsigned char c : s) {
      if (c >= 0x80) return false;
    }
    return true;
  }

  static std::string convert(Handle& handle, const char* from, const char* to, std::string_view in) {
    if (!handle) {
      iconv_t cd = iconv_open(to, from);
      if (cd == reinterpret_cast<iconv_t>(-1)) {
        throw Error(ErrorCode::config_error, std::string("iconv cannot convert ") + from + " -> " + to);
      }
      handle.reset(cd);
    }
    auto cd = static_cast<iconv_t>(handle.get());
    iconv(cd, nullptr, nullptr, nullptr, nullptr);
    std::string out(in.size() * 4 + 8, '\0');
    char* src = const_cast<char*>(in.data());
    std::size_t src_left = in.size();
    char* dst = out.data();
    std::size_t dst_left = out.size();
    if (iconv(cd, &src, &src_left, &dst, &dst_left) == static_cast<std::size_t>(-1)) {
      const auto offset = in.size() - src_left;
      throw Error(ErrorCode::decode_error, std::string("cannot convert byte sequence at offset ") +
                                               std::to_string(offset) + " from " + from + " to " + to);
    }
    out.resize(out.size() - dst_left);
    return out;
  }

  std::string label_;
  std::string charset_;
  mutable Handle to_utf8_;
  mutable Handle from_utf8_;
};

}  // namespace mpdw
