#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace pollbias {

/// Calendar date stored as days since 1970-01-01 (proleptic Gregorian).
class Date {
 public:
  Date() = default;
  static Date from_ymd(int year, unsigned month, unsigned day);
  // Strict YYYY-MM-DD; throws std::invalid_argument otherwise.
  static Date parse(std::string_view text);

  int days_since_epoch() const { return days_; }
  int year() const;
  std::string to_string() const;

  Date operator+(int days) const { return Date(days_ + days); }
  Date operator-(int days) const { return Date(days_ - days); }
  friend int operator-(Date a, Date b) { return a.days_ - b.days_; }
  auto operator<=>(const Date&) const = default;

 private:
  explicit Date(int days) : days_(days) {}
  int days_ = 0;
};

}  // namespace pollbias
