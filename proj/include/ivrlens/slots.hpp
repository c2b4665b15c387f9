#pragma once

#include <optional>

#include "ivrlens/error.hpp"

namespace ivrlens {

// Two-hour call slots between 8 AM and 10 PM by default: slot 0 = 8-10 AM,
// slot 6 = 8-10 PM. Times outside the grid are tracked separately, never
// folded into a slot.
struct TimeSlotGrid {
    int start_hour = 8;
    int end_hour = 22;
    int slot_hours = 2;

    int n_slots() const { return (end_hour - start_hour) / slot_hours; }

    void validate() const {
        if (slot_hours <= 0 || end_hour <= start_hour ||
            (end_hour - start_hour) % slot_hours != 0) {
            throw DataError("invalid time slot grid");
        }
    }
};

// Slot index for a time of day (seconds since midnight), or nullopt when the
// time falls outside [start_hour, end_hour).
inline std::optional<int> assign_time_slot(int seconds_of_day, const TimeSlotGrid& grid) {
    int start = grid.start_hour * 3600;
    int end = grid.end_hour * 3600;
    if (seconds_of_day < start || seconds_of_day >= end) return std::nullopt;
    return (seconds_of_day - start) / (grid.slot_hours * 3600);
}

}  // namespace ivrlens
