// SPDX-License-Identifier: Apache-2.0

#include "unet/result.hpp"
#include "unet/types.hpp"

namespace unet {

const char* err_name(Err e) {
  switch (e) {
    case Err::None: return "None";
    case Err::OutOfMemory: return "OutOfMemory";
    case Err::InvalidHandle: return "InvalidHandle";
    case Err::DoubleRelease: return "DoubleRelease";
    case Err::InvalidSize: return "InvalidSize";
    case Err::SharedSnip: return "SharedSnip";
    case Err::InvalidArgument: return "InvalidArgument";
    case Err::DuplicateEntry: return "DuplicateEntry";
    case Err::NotFound: return "NotFound";
    case Err::QueueFull: return "QueueFull";
    case Err::NoSuchEndpoint: return "NoSuchEndpoint";
    case Err::Unsupported: return "Unsupported";
    case Err::Timeout: return "Timeout";
    case Err::NotInitialized: return "NotInitialized";
    case Err::AlreadyInitialized: return "AlreadyInitialized";
    case Err::FrameTooLarge: return "FrameTooLarge";
    case Err::DeviceBusy: return "DeviceBusy";
    case Err::NoPendingFrame: return "NoPendingFrame";
    case Err::BufferTooSmall: return "BufferTooSmall";
    case Err::DatagramTooLarge: return "DatagramTooLarge";
    case Err::InvalidDispatch: return "InvalidDispatch";
    case Err::OverlapMismatch: return "OverlapMismatch";
    case Err::StaleTag: return "StaleTag";
    case Err::ReassemblyFull: return "ReassemblyFull";
    case Err::NoRoute: return "NoRoute";
    case Err::NeighborUnresolved: return "NeighborUnresolved";
    case Err::BadChecksum: return "BadChecksum";
    case Err::BadLength: return "BadLength";
    case Err::MessageTooLarge: return "MessageTooLarge";
    case Err::AddressInUse: return "AddressInUse";
    case Err::Closed: return "Closed";
  }
  return "Unknown";
}

const char* nettype_name(NetType t) {
  switch (t) {
    case NetType::Undef: return "undef";
    case NetType::Netif: return "netif";
    case NetType::Sixlowpan: return "sixlowpan";
    case NetType::Ipv6: return "ipv6";
    case NetType::Udp: return "udp";
    case NetType::Raw: return "raw";
  }
  return "?";
}

}  // namespace unet
