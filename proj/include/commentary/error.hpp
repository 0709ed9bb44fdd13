// Copyright 2026 The Commentary Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef COMMENTARY_ERROR_HPP
#define COMMENTARY_ERROR_HPP

#include <stdexcept>
#include <string>

namespace commentary {

// Base of every exception the library throws. Messages are prefixed with the
// owning module ("media: ...", "subtitles: ...").
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace commentary

#endif  // COMMENTARY_ERROR_HPP
