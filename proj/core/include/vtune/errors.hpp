// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace vtune {

// Base of every error raised by the library. Callers that only care about
// "did the protocol step fail" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller violated a documented precondition (bad params, empty input).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class UnknownToken : public Error {
 public:
  using Error::Error;
};

class GenerationStalled : public Error {
 public:
  using Error::Error;
};

class ZeroEntropyModel : public Error {
 public:
  using Error::Error;
};

// Trigger or signature kept colliding with text already in the dataset.
class CollisionError : public Error {
 public:
  using Error::Error;
};

class TooManyBackdoors : public Error {
 public:
  using Error::Error;
};

class SearchSpaceTooLarge : public Error {
 public:
  using Error::Error;
};

class DatasetFormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  using Error::Error;
};

class AuthError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class Timeout : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class EmptyResponse : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class JobFailed : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

}  // namespace vtune
