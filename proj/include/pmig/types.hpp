#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace pmig {

using PageId = std::uint64_t;
using NodeId = std::int32_t;
using CoreId = std::int32_t;
using OwnerId = std::uint32_t;

constexpr std::size_t kPageSize = 4096;
constexpr std::size_t kPageMetaSize = 64;
constexpr std::size_t kCacheLine = 64;
constexpr NodeId kNoNode = -1;
constexpr OwnerId kNoOwner = 0;

// Per-page status codes. Non-negative values are node ids; negative values
// mirror the Linux errno a move_pages caller would see.
enum StatusCode : std::int32_t {
    kENoEnt = -2,
    kENoMem = -12,
    kEAccess = -13,
    kEFault = -14,
    kEBusy = -16,
    kEInvalNode = -19,
    kUnset = std::numeric_limits<std::int32_t>::min(),
};

using Status = std::int32_t;

std::string status_name(Status s);

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MalformedConfig : public Error {
public:
    using Error::Error;
};

class NodeExhausted : public Error {
public:
    explicit NodeExhausted(NodeId node)
        : Error("no free frame on node " + std::to_string(node)), node_(node) {}
    NodeId node() const noexcept { return node_; }

private:
    NodeId node_;
};

class UnmappedPage : public Error {
public:
    explicit UnmappedPage(PageId page)
        : Error("page " + std::to_string(page) + " is not mapped"), page_(page) {}
    PageId page() const noexcept { return page_; }

private:
    PageId page_;
};

class UnlockNotOwner : public Error {
public:
    using Error::Error;
};

class CapacityExceeded : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace pmig
