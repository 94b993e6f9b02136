//! Attribute value spaces for synthetic persons.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::{Error, Result};

pub const MONTHS: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September",
    "October", "November", "December",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Employer {
    pub name: String,
    pub city: String,
}

/// Finite, ordered value lists from which person attributes are drawn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeCatalog {
    pub first_names: Vec<String>,
    pub middle_names: Vec<String>,
    pub last_names: Vec<String>,
    pub cities: Vec<String>,
    pub universities: Vec<String>,
    pub majors: Vec<String>,
    pub employers: Vec<Employer>,
    pub day_range: (u8, u8),
    pub year_range: (u16, u16),
}

fn owned(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn check_list(name: &str, xs: &[String]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidCatalog(format!("{name} is empty")));
    }
    let mut seen = HashSet::new();
    for x in xs {
        if !seen.insert(x) {
            return Err(Error::InvalidCatalog(format!("{name} has duplicate {x:?}")));
        }
    }
    Ok(())
}

impl AttributeCatalog {
    /// The bundled catalog: US-flavoured names, cities, universities and
    /// large employers with their headquarters cities.
    pub fn standard() -> Self {
        let first = owned(FIRST_NAMES);
        Self {
            middle_names: first.clone(),
            first_names: first,
            last_names: owned(LAST_NAMES),
            cities: owned(CITIES),
            universities: owned(UNIVERSITIES),
            majors: owned(MAJORS),
            employers: EMPLOYERS
                .iter()
                .map(|(n, c)| Employer { name: n.to_string(), city: c.to_string() })
                .collect(),
            day_range: (1, 28),
            year_range: (1900, 2099),
        }
    }

    /// A catalog where every list has exactly one entry.
    pub fn singleton() -> Self {
        Self {
            first_names: owned(&["Ada"]),
            middle_names: owned(&["Grace"]),
            last_names: owned(&["Lovelace"]),
            cities: owned(&["Boston, MA"]),
            universities: owned(&["Hendrix College"]),
            majors: owned(&["Physics"]),
            employers: vec![Employer { name: "Microsoft".into(), city: "Redmond, WA".into() }],
            day_range: (3, 3),
            year_range: (1950, 1950),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_list("first_names", &self.first_names)?;
        check_list("middle_names", &self.middle_names)?;
        check_list("last_names", &self.last_names)?;
        check_list("cities", &self.cities)?;
        check_list("universities", &self.universities)?;
        check_list("majors", &self.majors)?;
        let names: Vec<String> = self.employers.iter().map(|e| e.name.clone()).collect();
        check_list("employers", &names)?;
        if self.employers.iter().any(|e| e.city.is_empty()) {
            return Err(Error::InvalidCatalog("employer without city".into()));
        }
        let (d0, d1) = self.day_range;
        if d0 < 1 || d1 > 28 || d0 > d1 {
            return Err(Error::InvalidCatalog(format!("day range {d0}..={d1} outside 1..=28")));
        }
        let (y0, y1) = self.year_range;
        if y0 < 1900 || y1 > 2099 || y0 > y1 {
            return Err(Error::InvalidCatalog(format!("year range {y0}..={y1} outside 1900..=2099")));
        }
        Ok(())
    }

    /// Number of distinct full names, honouring first != middle.
    pub fn name_space(&self) -> usize {
        let overlap = self
            .first_names
            .iter()
            .filter(|f| self.middle_names.contains(f))
            .count();
        (self.first_names.len() * self.middle_names.len() - overlap) * self.last_names.len()
    }
}

const FIRST_NAMES: &[&str] = &[
    "Aaron", "Abigail", "Adam", "Alice", "Amanda", "Andrew", "Angela", "Anthony", "Barbara",
    "Benjamin", "Brandon", "Brian", "Carol", "Catherine", "Charles", "Christine", "Christopher",
    "Cynthia", "Daniel", "David", "Deborah", "Denise", "Diana", "Donald", "Douglas", "Edward",
    "Elizabeth", "Emily", "Eric", "Frank", "Gary", "George", "Gregory", "Hannah", "Helen",
    "Henry", "Jacob", "James", "Janet", "Jason", "Jeffrey", "Jennifer", "Jessica", "John",
    "Jonathan", "Joseph", "Joshua", "Julia", "Karen", "Kathleen", "Kevin", "Laura", "Linda",
    "Lisa", "Margaret", "Maria", "Mark", "Matthew", "Megan", "Melissa", "Michael", "Natalie",
    "Nicholas", "Olivia", "Patricia", "Patrick", "Paul", "Rachel", "Raymond", "Rebecca",
    "Richard", "Robert", "Ronald", "Samantha", "Samuel", "Sandra", "Sarah", "Scott", "Sharon",
    "Stephen", "Steven", "Susan", "Thomas", "Timothy", "Victoria", "Walter", "Wayne", "William",
];

const LAST_NAMES: &[&str] = &[
    "Adams", "Allen", "Anderson", "Bailey", "Baker", "Bennett", "Brooks", "Brown", "Butler",
    "Campbell", "Carter", "Clark", "Collins", "Cook", "Cooper", "Cox", "Davis", "Deleon",
    "Diaz", "Edwards", "Evans", "Fisher", "Flowers", "Foster", "Garcia", "Gomez", "Gordon",
    "Gray", "Green", "Hall", "Harris", "Hayes", "Hill", "Howard", "Hughes", "Jackson",
    "James", "Jenkins", "Johnson", "Jones", "Kelly", "Kim", "King", "Lee", "Lewis", "Long",
    "Lopez", "Martin", "Martinez", "Miller", "Mitchell", "Moore", "Morgan", "Morris", "Murphy",
    "Nelson", "Nguyen", "Parker", "Perez", "Peterson", "Phillips", "Price", "Reed", "Richardson",
    "Rivera", "Roberts", "Robinson", "Rogers", "Ross", "Sanchez", "Sanders", "Schneider",
    "Scott", "Smith", "Stewart", "Sullivan", "Taylor", "Thomas", "Thompson", "Torres", "Turner",
    "Walker", "Ward", "Watson", "White", "Williams", "Wilson", "Wise", "Wood", "Wright", "Young",
];

const CITIES: &[&str] = &[
    "Akron, OH", "Albany, NY", "Albuquerque, NM", "Amarillo, TX", "Anchorage, AK",
    "Ann Arbor, MI", "Asheville, NC", "Aurora, IL", "Austin, TX", "Bakersfield, CA",
    "Baton Rouge, LA", "Bellevue, WA", "Benge, WA", "Billings, MT", "Birmingham, AL",
    "Boise, ID", "Boulder, CO", "Bozeman, MT", "Buffalo, NY", "Burlington, VT",
    "Cedar Rapids, IA", "Chandler, AZ", "Charleston, SC", "Chattanooga, TN", "Cheyenne, WY",
    "Columbia, MO", "Concord, NH", "Dayton, OH", "Des Moines, IA", "Duluth, MN", "Durham, NC",
    "El Paso, TX", "Erie, PA", "Eugene, OR", "Evansville, IN", "Fall River, MA", "Fargo, ND",
    "Flagstaff, AZ", "Fort Wayne, IN", "Fresno, CA", "Gainesville, FL", "Green Bay, WI",
    "Greenville, SC", "Hartford, CT", "Helena, MT", "Honolulu, HI", "Huntsville, AL",
    "Ithaca, NY", "Jackson, MS", "Juneau, AK", "Kalamazoo, MI", "Knoxville, TN",
    "Lafayette, LA", "Lansing, MI", "Laredo, TX", "Lexington, KY", "Lincoln, NE",
    "Little Rock, AR", "Lubbock, TX", "Madison, WI", "Mobile, AL", "Modesto, CA",
    "Montpelier, VT", "Mount Croghan, SC", "Naperville, IL", "Newark, NJ", "Norfolk, VA",
    "Ogden, UT", "Olympia, WA", "Omaha, NE", "Orlando, FL", "Pensacola, FL", "Peoria, IL",
    "Portland, ME", "Providence, RI", "Provo, UT", "Pueblo, CO", "Raleigh, NC", "Reno, NV",
    "Richmond, VA", "Roanoke, VA", "Rochester, MN", "Rockford, IL", "Salem, OR",
    "Santa Fe, NM", "Savannah, GA", "Scranton, PA", "Sioux Falls, SD", "Spokane, WA",
    "Springfield, MO", "Syracuse, NY", "Talbot, IN", "Tallahassee, FL", "Tempe, AZ",
    "Toledo, OH", "Topeka, KS", "Tucson, AZ", "Tulsa, OK", "Waco, TX", "Wichita, KS",
    "Wilmington, DE", "Worcester, MA", "Wrentham, MA", "Yakima, WA",
];

const UNIVERSITIES: &[&str] = &[
    "Arizona State University", "Auburn University", "Baylor University", "Boston College",
    "Brandeis University", "Brazosport College", "Brown University", "Bucknell University",
    "California Institute of Integral Studies", "Carleton College", "Clemson University",
    "Colby College", "Colgate University", "Cornell University", "Davidson College",
    "Drexel University", "Duke University", "Emory University", "Florida State University",
    "Fordham University", "Furman University", "Georgetown University", "Gonzaga University",
    "Grinnell College", "Hendrix College", "Howard University", "Iowa State University",
    "Kenyon College", "Lehigh University", "Marquette University", "Middlebury College",
    "Northeastern University", "Oberlin College", "Ohio State University",
    "Oregon State University", "Pomona College", "Purdue University", "Reed College",
    "Rice University", "Rutgers University", "Santa Clara University", "Smith College",
    "Stanford University", "Temple University", "Trinity College", "Tufts University",
    "Tulane University", "University of Arizona", "University of Denver",
    "University of Kansas", "University of Oregon", "University of Utah",
    "University of Vermont", "University of Wisconsin--Superior", "Vanderbilt University",
    "Vassar College", "Villanova University", "Wake Forest University", "Wesleyan University",
    "Whitman College",
];

const MAJORS: &[&str] = &[
    "Accounting", "Aerospace Engineering", "Anthropology", "Applied Mathematics",
    "Architecture", "Art History", "Astronomy", "Biochemistry", "Biology",
    "Chemical Engineering", "Chemistry", "Civil Engineering", "Communications",
    "Computer Science", "Criminal Justice", "Economics", "Education", "Electrical Engineering",
    "English Literature", "Environmental Science", "Finance", "Geology", "History",
    "Human Services And Community Organization", "Industrial Design", "Journalism",
    "Linguistics", "Marketing", "Mechanical Engineering", "Music", "Nursing",
    "Operations Logistics And E-Commerce", "Philosophy", "Physics", "Political Science",
    "Psychology", "Public Health", "Sociology", "Statistics", "Theater Arts",
];

const EMPLOYERS: &[(&str, &str)] = &[
    ("Abbott Laboratories", "Abbott Park, IL"),
    ("Alphabet", "Mountain View, CA"),
    ("Amazon", "Seattle, WA"),
    ("American Express", "New York, NY"),
    ("Apple", "Cupertino, CA"),
    ("Boeing", "Arlington, VA"),
    ("Caterpillar", "Irving, TX"),
    ("Chevron", "San Ramon, CA"),
    ("Cisco Systems", "San Jose, CA"),
    ("Coca-Cola", "Atlanta, GA"),
    ("ConocoPhillips", "Houston, TX"),
    ("Costco Wholesale", "Issaquah, WA"),
    ("Deere", "Moline, IL"),
    ("Delta Air Lines", "Atlanta, GA"),
    ("Dow", "Midland, MI"),
    ("ExxonMobil", "Spring, TX"),
    ("FedEx", "Memphis, TN"),
    ("Ford Motor", "Dearborn, MI"),
    ("General Electric", "Boston, MA"),
    ("General Mills", "Minneapolis, MN"),
    ("Goldman Sachs", "New York, NY"),
    ("Home Depot", "Atlanta, GA"),
    ("Honeywell", "Charlotte, NC"),
    ("Intel", "Santa Clara, CA"),
    ("JPMorgan Chase", "New York, NY"),
    ("Johnson & Johnson", "New Brunswick, NJ"),
    ("Kroger", "Cincinnati, OH"),
    ("Lockheed Martin", "Bethesda, MD"),
    ("Lowe's", "Mooresville, NC"),
    ("Merck", "Rahway, NJ"),
    ("Microsoft", "Redmond, WA"),
    ("Nike", "Beaverton, OR"),
    ("Oracle", "Austin, TX"),
    ("PepsiCo", "Purchase, NY"),
    ("Pfizer", "New York, NY"),
    ("Procter & Gamble", "Cincinnati, OH"),
    ("Starbucks", "Seattle, WA"),
    ("Target", "Minneapolis, MN"),
    ("Tyson Foods", "Springdale, AR"),
    ("Walmart", "Bentonville, AR"),
    ("Westlake", "Houston, TX"),
];
