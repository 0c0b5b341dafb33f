/*
 Copyright 2026 The spatialrel Authors.
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace spatialrel {

// Exit-code classes used by the CLI: usage = 1, data = 2, invariant = 3.

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input that does not parse or does not match the expected schema.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
public:
    using DataError::DataError;
};

class SchemaError : public DataError {
public:
    using DataError::DataError;
};

/// An internal consistency check failed; indicates a bug, not bad input.
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Raised by the sampler when an image cannot supply a usable object pair.
class NotEnoughObjects : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace spatialrel
