#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace slkit {

// A small ordered variant covering every value the toolkit moves around:
// nil (the distinguished "unwritten" value), unit acks, booleans, integers,
// and tuples (used for pairs, vectors and packed register contents).
class Val {
 public:
  enum class Kind : uint8_t { Nil, Unit, Bool, Int, Tup };

  Val() : kind_(Kind::Nil), scalar_(0) {}

  static Val nil() { return Val(); }
  static Val unit() {
    Val v;
    v.kind_ = Kind::Unit;
    return v;
  }
  static Val boolean(bool b) {
    Val v;
    v.kind_ = Kind::Bool;
    v.scalar_ = b ? 1 : 0;
    return v;
  }
  static Val integer(int64_t i) {
    Val v;
    v.kind_ = Kind::Int;
    v.scalar_ = i;
    return v;
  }
  static Val tup(std::vector<Val> kids) {
    Val v;
    v.kind_ = Kind::Tup;
    v.kids_ = std::move(kids);
    return v;
  }
  static Val pair(Val a, Val b) { return tup({std::move(a), std::move(b)}); }
  static Val vec(size_t n, const Val& fill) { return tup(std::vector<Val>(n, fill)); }

  Kind kind() const { return kind_; }
  bool is_nil() const { return kind_ == Kind::Nil; }
  bool as_bool() const { return scalar_ != 0; }
  int64_t as_int() const { return scalar_; }
  const std::vector<Val>& kids() const { return kids_; }
  std::vector<Val>& kids() { return kids_; }
  size_t size() const { return kids_.size(); }
  const Val& at(size_t i) const { return kids_[i]; }
  Val& at(size_t i) { return kids_[i]; }

  friend bool operator==(const Val& a, const Val& b) {
    if (a.kind_ != b.kind_) return false;
    switch (a.kind_) {
      case Kind::Nil:
      case Kind::Unit:
        return true;
      case Kind::Bool:
      case Kind::Int:
        return a.scalar_ == b.scalar_;
      case Kind::Tup:
        return a.kids_ == b.kids_;
    }
    return false;
  }
  friend bool operator!=(const Val& a, const Val& b) { return !(a == b); }
  friend bool operator<(const Val& a, const Val& b) {
    if (a.kind_ != b.kind_) return a.kind_ < b.kind_;
    switch (a.kind_) {
      case Kind::Nil:
      case Kind::Unit:
        return false;
      case Kind::Bool:
      case Kind::Int:
        return a.scalar_ < b.scalar_;
      case Kind::Tup:
        return a.kids_ < b.kids_;
    }
    return false;
  }

  std::string str() const {
    switch (kind_) {
      case Kind::Nil:
        return "-";
      case Kind::Unit:
        return "ok";
      case Kind::Bool:
        return scalar_ ? "T" : "F";
      case Kind::Int:
        return std::to_string(scalar_);
      case Kind::Tup: {
        std::string out = "(";
        for (size_t i = 0; i < kids_.size(); ++i) {
          if (i) out += ",";
          out += kids_[i].str();
        }
        out += ")";
        return out;
      }
    }
    return "?";
  }

  // Canonical bytes for fingerprinting machine states.
  void encode(std::string& out) const {
    out.push_back(static_cast<char>(kind_));
    switch (kind_) {
      case Kind::Nil:
      case Kind::Unit:
        break;
      case Kind::Bool:
      case Kind::Int:
        out.append(reinterpret_cast<const char*>(&scalar_), sizeof(scalar_));
        break;
      case Kind::Tup: {
        uint32_t n = static_cast<uint32_t>(kids_.size());
        out.append(reinterpret_cast<const char*>(&n), sizeof(n));
        for (const Val& k : kids_) k.encode(out);
        break;
      }
    }
  }

 private:
  Kind kind_;
  int64_t scalar_;
  std::vector<Val> kids_;
};

}  // namespace slkit
